#ifndef SAFETE_SLICING_CONFIG_H_
#define SAFETE_SLICING_CONFIG_H_

#include <vector>

#include "safete/netmodel.h"

namespace safete {

// A partition of the nodes into k >= 2 controller slices.
class SlicingConfig {
 public:
  SlicingConfig() = default;
  // Checks disjointness, coverage of all nodes and k >= 2 (connectivity is
  // checked separately by ValidateSlicing). Throws InputError.
  SlicingConfig(std::vector<std::vector<NodeId>> slices, size_t num_nodes);

  size_t num_slices() const { return slices_.size(); }
  const std::vector<std::vector<NodeId>>& slices() const { return slices_; }
  const std::vector<NodeId>& slice(size_t j) const { return slices_.at(j); }
  int SliceOf(NodeId v) const { return owner_.at(v); }

  // Slices sorted internally and ordered by smallest member.
  SlicingConfig Canonical() const;
  bool operator==(const SlicingConfig& o) const { return slices_ == o.slices_; }

 private:
  std::vector<std::vector<NodeId>> slices_;
  std::vector<int> owner_;
};

}  // namespace safete

#endif  // SAFETE_SLICING_CONFIG_H_
