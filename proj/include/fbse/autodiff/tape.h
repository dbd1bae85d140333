// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_AUTODIFF_TAPE_H_
#define FBSE_AUTODIFF_TAPE_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <unordered_map>
#include <vector>

#include "fbse/autodiff/tensor.h"
#include "fbse/random.h"

namespace fbse::ad {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid while the tape
// lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

enum class Mode { kTrain, kInference };

// Batch statistics observed by a training-mode batch norm. The trainer folds
// them into the layer's running statistics after the step, in a fixed order.
struct BatchStats {
  const Parameter* running_mean = nullptr;
  const Parameter* running_var = nullptr;
  Tensor mean;
  Tensor var;
};

// Ordered record of primitive operations. Nodes are appended in execution
// order, which is a topological order, so Backward is a single reverse sweep.
// A tape supports one Backward call.
class Tape {
 public:
  // Called during the reverse sweep with this node's id. Reads the node's
  // gradient via grad(self) and accumulates into its parents' gradients.
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(Mode mode = Mode::kInference, uint64_t seed = 0);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::kTrain; }
  // Whether parameters become gradient leaves. Defaults to training().
  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  Rng& rng() { return rng_; }

  Var Constant(Tensor value);
  // Leaf that requires a gradient regardless of mode.
  Var Input(Tensor value);
  // Leaf referencing the parameter's storage; repeated calls return the same
  // node. Requires grad when the parameter is trainable and grad is enabled.
  Var Param(const Parameter& param);

  // Appends an op result. The node requires grad iff any parent does; only
  // then is `backward` retained.
  Var Record(Tensor value, std::initializer_list<Var> parents,
             BackwardFn backward);
  Var Record(Tensor value, const std::vector<Var>& parents,
             BackwardFn backward);

  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Gradient buffer for a node, zero-initialized on first access; nullptr
  // when the node does not require grad.
  Tensor* grad(int id);

  // Reverse sweep from a scalar loss. Throws ShapeError for a non-scalar or
  // detached loss and ValueError when called twice.
  void Backward(Var loss);
  bool backward_done() const { return backward_done_; }

  // Gradient of a recorded var after Backward (zeros if none flowed).
  Tensor Grad(Var v) const;
  // Gradient of a parameter after Backward; zeros when the parameter did not
  // participate.
  Tensor GradOf(const Parameter& param) const;

  void ReportBatchStats(BatchStats stats) { stats_.push_back(std::move(stats)); }
  const std::vector<BatchStats>& batch_stats() const { return stats_; }

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;  // parameter storage for Param leaves
    bool requires_grad = false;
    BackwardFn backward;
    std::unique_ptr<Tensor> grad;
  };

  Var Append(Node node);

  Mode mode_;
  bool grad_enabled_;
  Rng rng_;
  std::deque<Node> nodes_;  // stable addresses while recording
  std::unordered_map<const Parameter*, int> param_nodes_;
  std::vector<BatchStats> stats_;
  bool backward_done_ = false;
};

}  // namespace fbse::ad

#endif  // FBSE_AUTODIFF_TAPE_H_
