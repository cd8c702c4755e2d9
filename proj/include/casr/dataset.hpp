#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace casr {

struct DatasetItem {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path mask;
};

/// Image/mask pairs from `<root>/images/<id>.png` and `<root>/masks/<id>.png`,
/// ordered by id.
struct DatasetIndex {
  std::vector<DatasetItem> items;

  std::size_t size() const { return items.size(); }
};

/// Indexes a dataset directory; every image needs a mask with the same stem
/// and dimensions.
DatasetIndex scan_dataset(const std::filesystem::path& root);

/// Sorted ids of the PNG files in a directory.
std::vector<std::string> list_png_ids(const std::filesystem::path& dir);

struct FoldSplit {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // item index -> fold

  std::vector<std::size_t> members(int fold) const;
  std::vector<std::size_t> complement(std::initializer_list<int> folds) const;
};

/// Seeded shuffle, then round-robin assignment of the shuffled order.
FoldSplit kfold_split(std::size_t n, int k, std::uint64_t seed);

/// CSV with header `id,fold`, one row per item in index order.
void write_fold_csv(const std::filesystem::path& path, const std::vector<std::string>& ids, const FoldSplit& split);

}  // namespace casr
