#include "lambda_lqg/state_space.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "lambda_lqg/errors.hpp"

namespace lambda_lqg {

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << name << " is " << shape(m) << ", expected " << rows << "x" << cols;
    fail(ErrorCode::kDimensionMismatch, os.str());
  }
}

}  // namespace

StateSpaceModel::StateSpaceModel(Matrix a, Matrix b1, Matrix b2, Matrix c1, Matrix c2,
                                 Matrix d12, Matrix d21, std::optional<double> h)
    : A(std::move(a)),
      B1(std::move(b1)),
      B2(std::move(b2)),
      C1(std::move(c1)),
      C2(std::move(c2)),
      D12(std::move(d12)),
      D21(std::move(d21)),
      sample_period(h) {
  D11 = Matrix::Zero(C1.rows(), B1.cols());
  validate();
}

void StateSpaceModel::validate() const {
  const Eigen::Index n = A.rows();
  expect_shape(A, n, n, "A");
  const Eigen::Index q = B1.cols();
  const Eigen::Index m = B2.cols();
  const Eigen::Index p1 = C1.rows();
  const Eigen::Index p = C2.rows();
  expect_shape(B1, n, q, "B1");
  expect_shape(B2, n, m, "B2");
  expect_shape(C1, p1, n, "C1");
  expect_shape(C2, p, n, "C2");
  expect_shape(D11, p1, q, "D11");
  expect_shape(D12, p1, m, "D12");
  expect_shape(D21, p, q, "D21");
  if (sample_period && !(*sample_period > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "discrete model needs a positive sample period");
  }
}

void StateSpaceModel::validate_for_synthesis() const {
  validate();
  if (states() < 1 || control_inputs() < 1 || measurements() < 1) {
    fail(ErrorCode::kDimensionMismatch, "synthesis needs n, m, p >= 1");
  }
  Eigen::LLT<Matrix> r(D12.transpose() * D12);
  if (r.info() != Eigen::Success) {
    fail(ErrorCode::kInvalidArgument, "D12ᵀD12 is not positive definite");
  }
  Eigen::LLT<Matrix> v(D21 * D21.transpose());
  if (v.info() != Eigen::Success) {
    fail(ErrorCode::kInvalidArgument, "D21D21ᵀ is not positive definite");
  }
}

void LinearController::validate() const {
  const Eigen::Index n = A.rows();
  expect_shape(A, n, n, "controller A");
  expect_shape(B, n, B.cols(), "controller B");
  expect_shape(C, C.rows(), n, "controller C");
  expect_shape(D, C.rows(), B.cols(), "controller D");
}

LinearController LinearController::zero(Eigen::Index inputs, Eigen::Index outputs) {
  return {Matrix(0, 0), Matrix(0, inputs), Matrix(outputs, 0), Matrix::Zero(outputs, inputs)};
}

LinearController LinearController::static_gain(const Matrix& d) {
  return {Matrix(0, 0), Matrix(0, d.cols()), Matrix(d.rows(), 0), d};
}

std::vector<Matrix> LinearController::markov_parameters(int count) const {
  std::vector<Matrix> out;
  if (count <= 0) return out;
  out.push_back(D);
  Matrix ab = B;
  for (int k = 1; k < count; ++k) {
    out.push_back(C * ab);
    ab = A * ab;
  }
  return out;
}

std::vector<SubsystemBlocks> block_boundaries(const std::vector<StateSpaceModel>& models) {
  std::vector<SubsystemBlocks> out;
  SubsystemBlocks cursor;
  for (const auto& m : models) {
    SubsystemBlocks b;
    b.states = {cursor.states.offset, m.states()};
    b.noise = {cursor.noise.offset, m.noise_inputs()};
    b.inputs = {cursor.inputs.offset, m.control_inputs()};
    b.measurements = {cursor.measurements.offset, m.measurements()};
    cursor.states.offset += m.states();
    cursor.noise.offset += m.noise_inputs();
    cursor.inputs.offset += m.control_inputs();
    cursor.measurements.offset += m.measurements();
    out.push_back(b);
  }
  return out;
}

StateSpaceModel block_diag(const std::vector<StateSpaceModel>& models) {
  if (models.empty()) fail(ErrorCode::kInvalidArgument, "block_diag of an empty list");
  for (const auto& m : models) {
    m.validate();
    if (m.sample_period != models.front().sample_period) {
      fail(ErrorCode::kDomainMismatch, "block_diag needs models on one time domain");
    }
  }
  if (models.size() == 1) return models.front();
  auto collect = [&](auto member) {
    std::vector<Matrix> blocks;
    blocks.reserve(models.size());
    for (const auto& m : models) blocks.push_back(m.*member);
    return block_diagonal(blocks);
  };
  StateSpaceModel out;
  out.A = collect(&StateSpaceModel::A);
  out.B1 = collect(&StateSpaceModel::B1);
  out.B2 = collect(&StateSpaceModel::B2);
  out.C1 = collect(&StateSpaceModel::C1);
  out.C2 = collect(&StateSpaceModel::C2);
  out.D11 = collect(&StateSpaceModel::D11);
  out.D12 = collect(&StateSpaceModel::D12);
  out.D21 = collect(&StateSpaceModel::D21);
  out.sample_period = models.front().sample_period;
  out.validate();
  return out;
}

StateSpaceModel close_loop(const StateSpaceModel& plant, const LinearController& k) {
  plant.validate();
  k.validate();
  if (!plant.is_discrete()) {
    fail(ErrorCode::kUnsupportedRepresentation,
         "close_loop needs a discrete plant with delays realized as buffer states");
  }
  if (k.inputs() != plant.measurements() || k.outputs() != plant.control_inputs()) {
    fail(ErrorCode::kDimensionMismatch, "controller does not match plant measurement/input sizes");
  }
  const Eigen::Index n = plant.states();
  const Eigen::Index nk = k.states();
  const Eigen::Index q = plant.noise_inputs();
  StateSpaceModel cl;
  cl.A.resize(n + nk, n + nk);
  cl.A.topLeftCorner(n, n) = plant.A + plant.B2 * k.D * plant.C2;
  cl.A.topRightCorner(n, nk) = plant.B2 * k.C;
  cl.A.bottomLeftCorner(nk, n) = k.B * plant.C2;
  cl.A.bottomRightCorner(nk, nk) = k.A;
  cl.B1.resize(n + nk, q);
  cl.B1.topRows(n) = plant.B1 + plant.B2 * k.D * plant.D21;
  cl.B1.bottomRows(nk) = k.B * plant.D21;
  cl.C1.resize(plant.regulated_outputs(), n + nk);
  cl.C1.leftCols(n) = plant.C1 + plant.D12 * k.D * plant.C2;
  cl.C1.rightCols(nk) = plant.D12 * k.C;
  cl.D11 = plant.D11 + plant.D12 * k.D * plant.D21;
  cl.B2 = Matrix(n + nk, 0);
  cl.C2 = Matrix(0, n + nk);
  cl.D12 = Matrix(plant.regulated_outputs(), 0);
  cl.D21 = Matrix(0, q);
  cl.sample_period = plant.sample_period;
  return cl;
}

Matrix expm(const Matrix& m) {
  if (m.size() == 0) return m;
  return m.exp();
}

DiscreteNoise discretize_noise(const StateSpaceModel& model, double h) {
  if (!(h > 0.0)) fail(ErrorCode::kInvalidArgument, "sample period must be positive");
  model.validate();
  const Eigen::Index n = model.states();
  // Van Loan: exp([[-A, B1B1ᵀ], [0, Aᵀ]] h) = [[·, G12], [0, G22]], Qd = G22ᵀ G12.
  Matrix vl = Matrix::Zero(2 * n, 2 * n);
  vl.topLeftCorner(n, n) = -model.A;
  vl.topRightCorner(n, n) = model.B1 * model.B1.transpose();
  vl.bottomRightCorner(n, n) = model.A.transpose();
  const Matrix g = expm(vl * h);
  DiscreteNoise out;
  out.process = symmetrize(g.bottomRightCorner(n, n).transpose() * g.topRightCorner(n, n));
  out.measurement = symmetrize(model.D21 * model.D21.transpose() / h);
  return out;
}

StateSpaceModel discretize_zoh(const StateSpaceModel& model, double h) {
  if (!(h > 0.0)) fail(ErrorCode::kInvalidArgument, "sample period must be positive");
  model.validate();
  if (model.is_discrete()) {
    fail(ErrorCode::kDomainMismatch, "discretize_zoh expects a continuous model");
  }
  if ((model.B1 * model.D21.transpose()).norm() > 1e-12 * (1.0 + model.B1.norm() * model.D21.norm())) {
    fail(ErrorCode::kUnsupportedRepresentation,
         "correlated process/measurement noise (B1 D21ᵀ != 0) is not supported");
  }
  const Eigen::Index n = model.states();
  const Eigen::Index m = model.control_inputs();
  const Eigen::Index p = model.measurements();
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = model.A;
  aug.topRightCorner(n, m) = model.B2;
  const Matrix phi = expm(aug * h);

  const DiscreteNoise noise = discretize_noise(model, h);
  StateSpaceModel out;
  out.A = phi.topLeftCorner(n, n);
  out.B2 = phi.topRightCorner(n, m);
  out.B1 = Matrix::Zero(n, n + p);
  out.B1.leftCols(n) = psd_sqrt(noise.process);
  out.D21 = Matrix::Zero(p, n + p);
  out.D21.rightCols(p) = psd_sqrt(noise.measurement);
  out.C1 = model.C1;
  out.C2 = model.C2;
  out.D12 = model.D12;
  out.D11 = Matrix::Zero(model.regulated_outputs(), n + p);
  out.sample_period = h;
  out.validate();
  return out;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& doc, Eigen::Index cols_if_empty) {
  if (!doc.is_array()) fail(ErrorCode::kConfig, "matrix must be a nested array");
  const auto rows = static_cast<Eigen::Index>(doc.size());
  if (rows == 0) return Matrix(0, cols_if_empty);
  if (!doc[0].is_array()) fail(ErrorCode::kConfig, "matrix rows must be arrays");
  const auto cols = static_cast<Eigen::Index>(doc[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = doc[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      fail(ErrorCode::kConfig, "ragged matrix");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto& v = row[static_cast<size_t>(j)];
      if (!v.is_number()) fail(ErrorCode::kConfig, "matrix entries must be numbers");
      m(i, j) = v.get<double>();
    }
  }
  return m;
}

nlohmann::json to_json(const StateSpaceModel& model) {
  model.validate();
  nlohmann::json doc;
  doc["A"] = matrix_to_json(model.A);
  doc["B1"] = matrix_to_json(model.B1);
  doc["B2"] = matrix_to_json(model.B2);
  doc["C1"] = matrix_to_json(model.C1);
  doc["C2"] = matrix_to_json(model.C2);
  doc["D12"] = matrix_to_json(model.D12);
  doc["D21"] = matrix_to_json(model.D21);
  if (!model.D11.isZero(0.0)) doc["D11"] = matrix_to_json(model.D11);
  doc["time_domain"] = model.is_discrete() ? "discrete" : "continuous";
  if (model.sample_period) doc["h"] = *model.sample_period;
  doc["dims"] = {{"n", model.states()},
                 {"q", model.noise_inputs()},
                 {"m", model.control_inputs()},
                 {"p1", model.regulated_outputs()},
                 {"p", model.measurements()}};
  return doc;
}

StateSpaceModel state_space_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorCode::kConfig, "state-space document must be an object");
  static const std::vector<std::string> known = {"A",  "B1",  "B2",          "C1", "C2",
                                                 "D11", "D12", "D21", "time_domain", "h", "dims"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorCode::kConfig, "unknown state-space key '" + key + "'");
    }
  }
  Eigen::Index n = 0, q = 0, m = 0, p1 = 0, p = 0;
  if (doc.contains("dims")) {
    const auto& d = doc.at("dims");
    n = d.at("n").get<Eigen::Index>();
    q = d.at("q").get<Eigen::Index>();
    m = d.at("m").get<Eigen::Index>();
    p1 = d.at("p1").get<Eigen::Index>();
    p = d.at("p").get<Eigen::Index>();
  }
  StateSpaceModel model;
  model.A = matrix_from_json(doc.at("A"), n);
  n = model.A.rows();
  model.B1 = matrix_from_json(doc.at("B1"), q);
  model.B2 = matrix_from_json(doc.at("B2"), m);
  model.C1 = matrix_from_json(doc.at("C1"), n);
  model.C2 = matrix_from_json(doc.at("C2"), n);
  model.D12 = matrix_from_json(doc.at("D12"), model.B2.cols());
  model.D21 = matrix_from_json(doc.at("D21"), model.B1.cols());
  if (model.B1.rows() == 0) model.B1.resize(n, model.B1.cols());
  if (model.B2.rows() == 0) model.B2.resize(n, model.B2.cols());
  if (model.C1.rows() == 0 && p1 > 0) model.C1.resize(p1, n);
  if (model.C2.rows() == 0 && p > 0) model.C2.resize(p, n);
  if (model.D12.rows() == 0) model.D12.resize(model.C1.rows(), model.B2.cols());
  if (model.D21.rows() == 0) model.D21.resize(model.C2.rows(), model.B1.cols());
  model.D11 = doc.contains("D11") ? matrix_from_json(doc.at("D11"), model.B1.cols())
                                  : Matrix::Zero(model.C1.rows(), model.B1.cols());
  const auto domain = doc.at("time_domain").get<std::string>();
  if (domain == "discrete") {
    model.sample_period = doc.at("h").get<double>();
  } else if (domain != "continuous") {
    fail(ErrorCode::kConfig, "time_domain must be 'continuous' or 'discrete'");
  } else if (doc.contains("h")) {
    fail(ErrorCode::kConfig, "continuous models carry no sample period");
  }
  model.validate();
  return model;
}

}  // namespace lambda_lqg
