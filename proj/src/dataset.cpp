#include "casr/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "casr/error.hpp"
#include "casr/image_io.hpp"
#include "casr/random.hpp"

namespace casr {

namespace fs = std::filesystem;

std::vector<std::string> list_png_ids(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

DatasetIndex scan_dataset(const fs::path& root) {
  DatasetIndex index;
  for (const auto& id : list_png_ids(root / "images")) {
    DatasetItem item{id, root / "images" / (id + ".png"), root / "masks" / (id + ".png")};
    if (!fs::exists(item.mask)) throw IoError("missing mask for " + id + ": " + item.mask.string());
    index.items.push_back(std::move(item));
  }
  return index;
}

std::vector<std::size_t> FoldSplit::members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldSplit::complement(std::initializer_list<int> folds) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (std::find(folds.begin(), folds.end(), assignment[i]) == folds.end()) out.push_back(i);
  return out;
}

FoldSplit kfold_split(std::size_t n, int k, std::uint64_t seed) {
  require(k >= 2, "kfold_split: k must be >= 2");
  require(static_cast<std::size_t>(k) <= n, "kfold_split: k must not exceed the item count");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  shuffle(order, rng);
  FoldSplit split{k, seed, std::vector<int>(n, 0)};
  for (std::size_t pos = 0; pos < n; ++pos) split.assignment[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return split;
}

void write_fold_csv(const fs::path& path, const std::vector<std::string>& ids, const FoldSplit& split) {
  require(ids.size() == split.assignment.size(), "write_fold_csv: id count does not match the split");
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "id,fold\n";
  for (std::size_t i = 0; i < ids.size(); ++i) os << ids[i] << ',' << split.assignment[i] << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace casr
