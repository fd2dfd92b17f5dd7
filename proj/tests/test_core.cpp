#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace anatssm;
using testing_support::gaussian;
using testing_support::random_dataset;
using testing_support::random_rotation;

// --------------------------------------------------------------------------
// numbers and OBJ

TEST(NumberFormat, ShortestRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-2.0), "-2");
}

TEST(NumberFormat, RejectsGarbage) {
  EXPECT_THROW(parse_double("1.5x"), ParseError);
  EXPECT_THROW(parse_double(""), ParseError);
}

TEST(ObjIo, RoundTripIsBitExact) {
  std::mt19937_64 rng(5);
  const ShapeDataset ds = random_dataset(rng, 1, 30);
  CorrespondedMesh mesh = ds.mesh(0);
  mesh.topology_id = "cloud";
  std::stringstream ss;
  write_obj(ss, mesh);
  const CorrespondedMesh back = read_obj(ss);
  ASSERT_EQ(back.vertices.size(), mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) EXPECT_EQ(back.vertices[i], mesh.vertices[i]);
  EXPECT_EQ(back.faces, mesh.faces);
  EXPECT_EQ(back.topology_id, "cloud");
}

TEST(ObjIo, AcceptsSlashedFaceReferences) {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 3/2\n");
  const CorrespondedMesh m = read_obj(in);
  ASSERT_EQ(m.faces.size(), 1u);
  EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
}

TEST(ObjIo, RejectsMalformedInput) {
  std::istringstream quad("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n");
  EXPECT_THROW(read_obj(quad), ParseError);
  std::istringstream oob("v 0 0 0\nv 1 0 0\nf 1 2 3\n");
  EXPECT_THROW(read_obj(oob), ParseError);
  std::istringstream bad("v 0 zero 0\n");
  EXPECT_THROW(read_obj(bad), ParseError);
  std::istringstream nan("v 0 nan 0\n");
  EXPECT_THROW(read_obj(nan), DataError);
}

TEST(Dataset, RoundTripThroughDirectory) {
  std::mt19937_64 rng(6);
  const ShapeDataset ds = random_dataset(rng, 4, 12);
  testing_support::TempDir dir("dataset");
  write_dataset(dir.path(), ds);
  const ShapeDataset back = read_dataset(dir.path());
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.ids, ds.ids);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(back.shapes[i].coords, ds.shapes[i].coords);
}

TEST(Dataset, RejectsMismatchedTopology) {
  std::mt19937_64 rng(7);
  ShapeDataset ds = random_dataset(rng, 2, 12);
  const ShapeDataset other = random_dataset(rng, 1, 15);
  EXPECT_THROW(ds.add(other.mesh(0), "odd"), TopologyError);
}

TEST(Dataset, VectorizeRoundTrip) {
  std::mt19937_64 rng(8);
  const ShapeDataset ds = random_dataset(rng, 1, 9);
  const CorrespondedMesh m = ds.mesh(0);
  EXPECT_EQ(vectorize(m).coords, ds.shapes[0].coords);
  EXPECT_EQ(ds.shapes[0].coords[3], m.vertices[1].x());
}

// --------------------------------------------------------------------------
// rigid alignment

TEST(Alignment, RecoversRigidlyMovedCopies) {
  std::mt19937_64 rng(11);
  const ShapeDataset base = random_dataset(rng, 1, 40, 0.0);
  ShapeDataset moved;
  for (int s = 0; s < 6; ++s) {
    CorrespondedMesh m = base.mesh(0);
    const Eigen::Matrix3d r = random_rotation(rng);
    const Eigen::Vector3d t(10.0 * s, -3.0 * s, 7.0);
    for (auto& v : m.vertices) v = r * v + t;
    moved.add(m, "m" + std::to_string(s));
  }
  const AlignmentResult res = rigid_align_detailed(moved);
  EXPECT_TRUE(res.converged);
  EXPECT_LT(procrustes_objective(res.aligned), 1e-16 * moved.shapes[0].coords.squaredNorm());
}

TEST(Alignment, ObjectiveNeverIncreasesAndRemovesTranslation) {
  std::mt19937_64 rng(12);
  ShapeDataset ds = random_dataset(rng, 10, 50, 2.0);
  for (auto& s : ds.shapes) {
    auto pts = detail::as_points(s.coords);
    const Eigen::Matrix3d r = random_rotation(rng);
    pts = (r * pts).colwise() + Eigen::Vector3d(5, 6, 7);
  }
  const AlignmentResult res = rigid_align_detailed(ds);
  for (std::size_t i = 1; i < res.objective_history.size(); ++i)
    EXPECT_LE(res.objective_history[i], res.objective_history[i - 1] * (1 + 1e-12));
  for (const auto& s : res.aligned.shapes) {
    EXPECT_LT(detail::as_points(s.coords).rowwise().mean().norm(), 1e-9);
  }
  // Every aligned shape is a rotation of its input: pairwise distances are kept.
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto a = detail::as_points(ds.shapes[i].coords);
    const auto b = detail::as_points(res.aligned.shapes[i].coords);
    EXPECT_NEAR((a.col(0) - a.col(17)).norm(), (b.col(0) - b.col(17)).norm(), 1e-9);
  }
}

TEST(Alignment, RotationMatchesBruteForceOptimum) {
  // Against a single fixed target, the per-shape rotation must beat random probes.
  std::mt19937_64 rng(13);
  const ShapeDataset ds = random_dataset(rng, 2, 30, 3.0);
  const ShapeDataset al = rigid_align(ds);
  const auto a = detail::as_points(al.shapes[0].coords);
  const auto b = detail::as_points(al.shapes[1].coords);
  const double best = (a - b).squaredNorm();
  for (int t = 0; t < 200; ++t) {
    const Eigen::AngleAxisd small(0.05 * (static_cast<double>(rng() % 1000) / 1000.0 - 0.5),
                                  Eigen::Vector3d::Random().normalized());
    EXPECT_GE((a - small.toRotationMatrix() * b).squaredNorm(), best - 1e-9);
  }
}

// --------------------------------------------------------------------------
// PCA base model

TEST(BaseSsm, MatchesDenseCovarianceEigenproblem) {
  std::mt19937_64 rng(21);
  const ShapeDataset ds = random_dataset(rng, 9, 10, 1.5);
  const BaseSsm model = build_base(ds);
  const Eigen::MatrixXd x = ds.matrix();
  const Eigen::VectorXd mean = x.rowwise().mean();
  const Eigen::MatrixXd c = x.colwise() - mean;
  const Eigen::MatrixXd cov = c * c.transpose() / 8.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd ev = eig.eigenvalues().reverse();
  ASSERT_EQ(model.rank(), 8);
  for (Eigen::Index i = 0; i < 8; ++i) {
    EXPECT_NEAR(model.eigenvalues[i], ev[i], 1e-9 * ev[0]);
    const Eigen::VectorXd v = eig.eigenvectors().col(cov.rows() - 1 - i);
    EXPECT_NEAR(std::abs(v.dot(model.basis.col(i))), 1.0, 1e-8);
  }
  EXPECT_LT((model.basis.transpose() * model.basis - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((model.mean - mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BaseSsm, SignConventionAndDescendingOrder) {
  std::mt19937_64 rng(22);
  const BaseSsm model = build_base(random_dataset(rng, 12, 20, 1.0));
  for (Eigen::Index c = 0; c < model.rank(); ++c) {
    Eigen::Index arg = 0;
    model.basis.col(c).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(model.basis(arg, c), 0.0);
    if (c > 0) {
      EXPECT_LE(model.eigenvalues[c], model.eigenvalues[c - 1]);
    }
  }
}

TEST(BaseSsm, ProjectSampleRoundTrip) {
  std::mt19937_64 rng(23);
  const ShapeDataset ds = random_dataset(rng, 7, 15, 1.0);
  const BaseSsm model = build_base(ds);
  for (const auto& s : ds.shapes) {
    const ShapeCoefficients a = project(model, s);
    EXPECT_LT((sample(model, a).coords - s.coords).cwiseAbs().maxCoeff(), 1e-9);
  }
  // Training coefficients have unit sample variance per mode.
  Eigen::MatrixXd alphas(static_cast<Eigen::Index>(ds.size()), model.rank());
  for (std::size_t i = 0; i < ds.size(); ++i) alphas.row(static_cast<Eigen::Index>(i)) = project(model, ds.shapes[i]).alpha;
  const Eigen::VectorXd var = alphas.colwise().squaredNorm() / 6.0;
  EXPECT_LT((var.array() - 1.0).abs().maxCoeff(), 1e-9);
}

TEST(BaseSsm, SamplePointsMatchesFullSample) {
  std::mt19937_64 rng(24);
  const BaseSsm model = build_base(random_dataset(rng, 6, 20, 1.0));
  const Eigen::VectorXd alpha = gaussian(rng, model.rank(), 1);
  const ShapeVector full = sample(model, {alpha});
  const auto pts = sample_points(model, alpha, {0, 7, 19});
  EXPECT_LT((pts[1] - full.coords.segment<3>(21)).norm(), 1e-12);
  EXPECT_THROW(sample(model, {Eigen::VectorXd::Zero(model.rank() + 1)}), DimensionError);
}

TEST(BaseSsm, IdenticalShapesGiveRankZero) {
  std::mt19937_64 rng(25);
  const ShapeDataset one = random_dataset(rng, 1, 10, 0.0);
  ShapeDataset ds;
  for (int i = 0; i < 3; ++i) ds.add(one.mesh(0), "c" + std::to_string(i));
  const BaseSsm model = build_base(ds);
  EXPECT_EQ(model.rank(), 0);
  EXPECT_TRUE(sample(model, {Eigen::VectorXd()}).coords.isApprox(ds.shapes[0].coords, 1e-15));
}

TEST(BaseSsm, TruncationKeepsLeadingModes) {
  std::mt19937_64 rng(26);
  const BaseSsm model = build_base(random_dataset(rng, 8, 12, 1.0));
  const BaseSsm t = model.truncated(3);
  EXPECT_EQ(t.rank(), 3);
  EXPECT_EQ(t.basis, model.basis.leftCols(3));
  EXPECT_THROW(model.truncated(model.rank() + 1), DimensionError);
}

// --------------------------------------------------------------------------
// model quality metrics

TEST(Metrics, CompactnessMonotoneToOne) {
  std::mt19937_64 rng(31);
  const BaseSsm model = build_base(random_dataset(rng, 10, 12, 1.0));
  double prev = 0.0;
  for (Eigen::Index r = 1; r <= model.rank(); ++r) {
    const double c = compactness(model, r);
    EXPECT_GE(c, prev);
    prev = c;
  }
  EXPECT_NEAR(compactness(model, model.rank()), 1.0, 1e-15);
  EXPECT_THROW(compactness(model, 0), DimensionError);
}

TEST(Metrics, GeneralityMatchesDirectLeaveOneOut) {
  std::mt19937_64 rng(32);
  const ShapeDataset ds = random_dataset(rng, 6, 8, 1.0);
  const auto curve = generality_curve(ds, 3);
  // Direct oracle for R = 2: dense eigen-decomposition of each reduced covariance.
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Eigen::MatrixXd x = ds.without(i).matrix();
    const Eigen::VectorXd mean = x.rowwise().mean();
    const Eigen::MatrixXd c = x.colwise() - mean;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c * c.transpose());
    const Eigen::MatrixXd p = eig.eigenvectors().rightCols(2);
    const Eigen::VectorXd d = ds.shapes[i].coords - mean;
    sum += (d - p * (p.transpose() * d)).squaredNorm();
  }
  EXPECT_NEAR(curve[1].squared, sum / 6.0, 1e-9 * sum);
  for (std::size_t r = 1; r < curve.size(); ++r) EXPECT_LE(curve[r].squared, curve[r - 1].squared * (1 + 1e-12));
}

TEST(Metrics, GeneralityNeedsTwoShapes) {
  std::mt19937_64 rng(33);
  EXPECT_THROW(generality_curve(random_dataset(rng, 1, 5), 1), InsufficientDataError);
}

TEST(Metrics, SpecificityIsSeedStableAndZeroForDegenerateModel) {
  std::mt19937_64 rng(34);
  const ShapeDataset ds = random_dataset(rng, 8, 10, 1.0);
  const BaseSsm model = build_base(ds);
  const MetricValue a = specificity(model, ds, 3, 40, 9), b = specificity(model, ds, 3, 40, 9);
  EXPECT_EQ(a.squared, b.squared);
  EXPECT_GT(a.squared, 0.0);
  // R = 0 draws the mean; its distance to the nearest shape is known exactly.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : ds.shapes) best = std::min(best, (s.coords - model.mean).squaredNorm());
  EXPECT_NEAR(specificity(model, ds, 0, 5, 1).squared, best, 1e-9 * best);

  ShapeDataset same;
  for (int i = 0; i < 3; ++i) same.add(ds.mesh(0), "c" + std::to_string(i));
  // Only the round-off in the mean separates it from the shapes.
  EXPECT_LT(specificity(build_base(same), same, 0, 10, 1).squared, 1e-24 * same.shapes[0].coords.squaredNorm());
}

TEST(Metrics, SpecificityMonteCarloMatchesClosedFormForOneShape) {
  // One training shape at the mean: E|s - mean|^2 = sum of the used eigenvalues.
  std::mt19937_64 rng(35);
  const ShapeDataset ds = random_dataset(rng, 6, 10, 1.0);
  const BaseSsm model = build_base(ds);
  ShapeDataset at_mean;
  CorrespondedMesh m = ds.mesh(0);
  m.vertices.clear();
  for (Eigen::Index k = 0; k < model.mean.size() / 3; ++k) m.vertices.emplace_back(model.mean.segment<3>(3 * k));
  at_mean.add(m, "mean");
  const MetricValue v = specificity(model, at_mean, 3, 20000, 4);
  const double expected = model.eigenvalues.head(3).sum();
  EXPECT_NEAR(v.squared, expected, 0.03 * expected);
}

TEST(Metrics, CsvHasOneRowPerMode) {
  std::mt19937_64 rng(36);
  const ShapeDataset ds = random_dataset(rng, 5, 8, 1.0);
  const BaseSsm model = build_base(ds);
  std::ostringstream out;
  write_metrics_csv(out, model_metrics(model, ds, 5, 1));
  std::istringstream in(out.str());
  std::string line;
  int rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line, "R,compactness,generality_sq_mm2,generality_rms_mm,specificity_sq_mm2,specificity_rms_mm");
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, model.rank());
}
