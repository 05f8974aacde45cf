#include "lambda_lqg/partitioned_plant.hpp"

#include <sstream>

#include "lambda_lqg/errors.hpp"

namespace lambda_lqg {

namespace {

bool off_diagonal_zero(const Matrix& m, const std::vector<SubsystemBlocks>& blocks,
                       BlockRange SubsystemBlocks::*rows, BlockRange SubsystemBlocks::*cols) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      if (i == j) continue;
      const BlockRange& r = blocks[i].*rows;
      const BlockRange& c = blocks[j].*cols;
      if (r.size == 0 || c.size == 0) continue;
      if (!m.block(r.offset, c.offset, r.size, c.size).isZero(0.0)) return false;
    }
  }
  return true;
}

}  // namespace

bool PartitionedPlant::is_block_diagonal() const {
  const auto& p = realization;
  return off_diagonal_zero(p.A, blocks, &SubsystemBlocks::states, &SubsystemBlocks::states) &&
         off_diagonal_zero(p.B1, blocks, &SubsystemBlocks::states, &SubsystemBlocks::noise) &&
         off_diagonal_zero(p.B2, blocks, &SubsystemBlocks::states, &SubsystemBlocks::inputs) &&
         off_diagonal_zero(p.C2, blocks, &SubsystemBlocks::measurements, &SubsystemBlocks::states) &&
         off_diagonal_zero(p.D21, blocks, &SubsystemBlocks::measurements, &SubsystemBlocks::noise);
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> PartitionedPlant::structure() const {
  const Eigen::Index k = subsystems();
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> s(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& r = blocks[i].states;
      const auto& c = blocks[j].states;
      s(i, j) = i == j || !realization.A.block(r.offset, c.offset, r.size, c.size).isZero(0.0);
    }
  }
  return s;
}

StateSpaceModel PartitionedPlant::subsystem(Eigen::Index i) const {
  if (i < 0 || i >= subsystems()) fail(ErrorCode::kInvalidArgument, "subsystem index out of range");
  const auto& b = blocks[i];
  const auto& p = realization;
  StateSpaceModel out;
  out.A = p.A.block(b.states.offset, b.states.offset, b.states.size, b.states.size);
  out.B1 = p.B1.block(b.states.offset, b.noise.offset, b.states.size, b.noise.size);
  out.B2 = p.B2.block(b.states.offset, b.inputs.offset, b.states.size, b.inputs.size);
  out.C2 = p.C2.block(b.measurements.offset, b.states.offset, b.measurements.size, b.states.size);
  out.D21 = p.D21.block(b.measurements.offset, b.noise.offset, b.measurements.size, b.noise.size);
  out.C1 = Matrix::Zero(0, b.states.size);
  out.D12 = Matrix::Zero(0, b.inputs.size);
  out.D11 = Matrix::Zero(0, b.noise.size);
  out.sample_period = p.sample_period;
  return out;
}

void PartitionedPlant::validate() const {
  realization.validate();
  Eigen::Index n = 0, q = 0, m = 0, p = 0;
  for (const auto& b : blocks) {
    if (b.states.offset != n || b.noise.offset != q || b.inputs.offset != m ||
        b.measurements.offset != p) {
      fail(ErrorCode::kDimensionMismatch, "block boundaries are not contiguous");
    }
    n += b.states.size;
    q += b.noise.size;
    m += b.inputs.size;
    p += b.measurements.size;
  }
  if (n != realization.states() || q != realization.noise_inputs() ||
      m != realization.control_inputs() || p != realization.measurements()) {
    fail(ErrorCode::kDimensionMismatch, "block boundaries do not cover the realization");
  }
  if (!is_block_diagonal()) {
    fail(ErrorCode::kInvalidArgument,
         "plant is not dynamically decoupled (A, B1, B2, C2, D21 must be block diagonal)");
  }
}

void regulated_output_from_cost(const CostSpec& cost, Eigen::Index inputs, Matrix& c1, Matrix& d12) {
  const Eigen::Index n = cost.Q.rows();
  if (cost.Q.cols() != n || cost.R.rows() != inputs || cost.R.cols() != inputs) {
    fail(ErrorCode::kDimensionMismatch, "cost weights do not match the plant dimensions");
  }
  Eigen::LLT<Matrix> llt(symmetrize(cost.R));
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::kInvalidArgument, "input weight R is not positive definite");
  }
  c1 = Matrix::Zero(n + inputs, n);
  c1.topRows(n) = psd_factor(cost.Q);
  d12 = Matrix::Zero(n + inputs, inputs);
  d12.bottomRows(inputs) = llt.matrixU();
}

PartitionedPlant partition(const std::vector<StateSpaceModel>& subsystems,
                           std::vector<std::string> names, const CostSpec& cost) {
  if (subsystems.empty()) fail(ErrorCode::kInvalidArgument, "no subsystems given");
  PartitionedPlant out;
  out.realization = block_diag(subsystems);
  out.blocks = block_boundaries(subsystems);
  out.names = std::move(names);
  out.names.resize(subsystems.size());
  auto& r = out.realization;
  regulated_output_from_cost(cost, r.control_inputs(), r.C1, r.D12);
  r.D11 = Matrix::Zero(r.C1.rows(), r.B1.cols());
  out.cost = cost;
  out.validate();
  return out;
}

PartitionedPlant discretize_plant(const PartitionedPlant& plant, double h) {
  plant.validate();
  std::vector<StateSpaceModel> parts;
  for (Eigen::Index i = 0; i < plant.subsystems(); ++i) {
    parts.push_back(discretize_zoh(plant.subsystem(i), h));
  }
  PartitionedPlant out;
  out.realization = block_diag(parts);
  out.blocks = block_boundaries(parts);
  out.names = plant.names;
  out.cost = plant.cost;
  out.realization.C1 = plant.realization.C1;
  out.realization.D12 = plant.realization.D12;
  out.realization.D11 = Matrix::Zero(out.realization.C1.rows(), out.realization.B1.cols());
  out.validate();
  return out;
}

}  // namespace lambda_lqg
