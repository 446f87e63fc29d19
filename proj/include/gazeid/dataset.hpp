#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gazeid/error.hpp"
#include "gazeid/grid.hpp"
#include "gazeid/types.hpp"

namespace gazeid {

/// One viewing: a subject's scanpath on an image and its saccade features.
struct DatasetItem {
  std::string subject_id;
  std::string image_id;
  Scanpath path;
  std::vector<SaccadeFeatures> features;
};

struct Dataset {
  std::vector<DatasetItem> items;
  /// Optional saliency per image id; images without one get an estimate.
  std::map<std::string, SaliencyMap> saliency;
  GridSpec grid;
  /// Global main-sequence rate the vigor features were computed with.
  double vigor_rate = kNaN;

  /// Sorted unique subject ids; the position of a subject is its class index.
  std::vector<std::string> subjects() const {
    std::set<std::string> s;
    for (const auto& it : items) s.insert(it.subject_id);
    return {s.begin(), s.end()};
  }

  /// Item indices per subject, in the order of subjects(), each list sorted
  /// by image id.
  std::vector<std::vector<std::size_t>> items_by_subject() const {
    const auto subs = subjects();
    std::vector<std::vector<std::size_t>> out(subs.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto at = std::lower_bound(subs.begin(), subs.end(), items[i].subject_id) - subs.begin();
      out[static_cast<std::size_t>(at)].push_back(i);
    }
    for (auto& list : out) {
      std::sort(list.begin(), list.end(),
                [&](std::size_t a, std::size_t b) { return items[a].image_id < items[b].image_id; });
    }
    return out;
  }

  void validate() const {
    grid.validate();
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& it : items) {
      require(!it.subject_id.empty() && !it.image_id.empty(), ErrorCode::kInvalidArgument,
              "dataset item without subject or image id");
      require(seen.emplace(it.subject_id, it.image_id).second, ErrorCode::kInvalidArgument,
              "duplicate item for subject '" + it.subject_id + "' image '" + it.image_id + "'");
      it.path.validate();
      require(it.features.size() + 1 == it.path.size(), ErrorCode::kDimensionMismatch,
              "item " + it.subject_id + "/" + it.image_id +
                  " has a feature count that does not match its fixations");
    }
    for (const auto& [image, map] : saliency) {
      require(map.grid == grid, ErrorCode::kDimensionMismatch,
              "saliency map for '" + image + "' does not match the dataset grid");
    }
  }
};

}  // namespace gazeid
