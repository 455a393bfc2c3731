#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mvf/trajectory.hpp"

using namespace mvf;
namespace fs = std::filesystem;

namespace {

Pose random_pose(std::mt19937& rng, double tmag = 1.0) {
  std::uniform_real_distribution<double> u(-1, 1);
  const Vec3 axis = Vec3(u(rng), u(rng), u(rng)).normalized();
  const double angle = 1.5 * u(rng);
  return Pose(Eigen::AngleAxisd(angle, axis).toRotationMatrix(),
              tmag * Vec3(u(rng), u(rng), u(rng)));
}

// independent absolute-orientation reference (quaternion method): the rigid
// map taking p into q, then the residual rmse
double horn_rmse(const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
  const size_t n = p.size();
  Vec3 mp = Vec3::Zero(), mq = Vec3::Zero();
  for (size_t i = 0; i < n; ++i) {
    mp += p[i];
    mq += q[i];
  }
  mp /= double(n);
  mq /= double(n);
  Mat3 S = Mat3::Zero();
  for (size_t i = 0; i < n; ++i) S += (p[i] - mp) * (q[i] - mq).transpose();
  Eigen::Matrix4d N;
  const double sxx = S(0, 0), sxy = S(0, 1), sxz = S(0, 2);
  const double syx = S(1, 0), syy = S(1, 1), syz = S(1, 2);
  const double szx = S(2, 0), szy = S(2, 1), szz = S(2, 2);
  N << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
      syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
      szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
      sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(N);
  int top = 0;
  es.eigenvalues().maxCoeff(&top);
  const Eigen::Vector4d v = es.eigenvectors().col(top);
  const Eigen::Quaterniond quat(v[0], v[1], v[2], v[3]);
  const Mat3 R = quat.normalized().toRotationMatrix();
  const Vec3 t = mq - R * mp;
  double sum = 0;
  for (size_t i = 0; i < n; ++i) sum += (R * p[i] + t - q[i]).squaredNorm();
  return std::sqrt(sum / double(n));
}

Trajectory from_points(const std::vector<Vec3>& pts) {
  Trajectory t;
  for (size_t i = 0; i < pts.size(); ++i) {
    t.append(double(i), Pose(Mat3::Identity(), pts[i]));
  }
  return t;
}

}  // namespace

TEST_SUITE("trajectory") {

TEST_CASE("append demands increasing timestamps") {
  Trajectory t;
  t.append(0.0, Pose::identity());
  t.append(0.5, Pose::identity());
  CHECK_THROWS_AS(t.append(0.5, Pose::identity()), std::invalid_argument);
  CHECK_THROWS_AS(t.append(0.1, Pose::identity()), std::invalid_argument);
  CHECK(t.size() == 2);
}

TEST_CASE("text format carries six decimals and round trips") {
  std::mt19937 rng(3);
  Trajectory t;
  t.append(0.0, random_pose(rng));
  t.append(0.033333, random_pose(rng));
  t.append(1.25, random_pose(rng));
  const std::string text = format_trajectory(t, "test header");
  CHECK(text.rfind("# test header", 0) == 0);
  std::istringstream iss(text);
  std::string line;
  int rows = 0;
  while (std::getline(iss, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    int cols = 0;
    while (ls >> tok) {
      const size_t dot = tok.find('.');
      REQUIRE(dot != std::string::npos);
      CHECK(tok.size() - dot - 1 == 6);
      ++cols;
    }
    CHECK(cols == 8);
    ++rows;
  }
  CHECK(rows == 3);

  const fs::path file = fs::temp_directory_path() / "mvf_traj_rt.txt";
  write_trajectory(t, file, "hdr");
  const Trajectory back = read_trajectory(file);
  fs::remove(file);
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(back.poses[i].t - t.poses[i].t) < 1e-6);
    CHECK((back.poses[i].pose.translation() - t.poses[i].pose.translation())
              .norm() < 2e-6);
    CHECK((back.poses[i].pose.rotation() - t.poses[i].pose.rotation()).norm() <
          1e-5);
  }
}

TEST_CASE("reader reports the offending line") {
  const fs::path file = fs::temp_directory_path() / "mvf_traj_bad.txt";
  {
    std::ofstream os(file);
    os << "# ok\n";
    os << "0.0 0 0 0 0 0 0 1\n";
    os << "0.5 0 0 0\n";  // truncated row
  }
  try {
    read_trajectory(file);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  fs::remove(file);
  CHECK_THROWS_AS(read_trajectory(fs::temp_directory_path() / "mvf_none.txt"),
                  IoError);
}

TEST_CASE("association pairs nearest stamps inside the window") {
  Trajectory a, b;
  a.append(0.0, Pose::identity());
  a.append(1.0, Pose::identity());
  a.append(2.0, Pose::identity());
  b.append(0.005, Pose::identity());
  b.append(1.5, Pose::identity());
  b.append(1.995, Pose::identity());
  const auto pairs = associate_trajectories(a, b, 0.02);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0] == std::pair<size_t, size_t>{0, 0});
  CHECK(pairs[1] == std::pair<size_t, size_t>{2, 2});
}

TEST_CASE("window edge is inclusive and pairing is one to one") {
  Trajectory a, b;
  a.append(0.0, Pose::identity());
  a.append(0.008, Pose::identity());
  b.append(0.005, Pose::identity());
  // greedy in a-order: a0 grabs b0, a1 finds it used
  const auto pairs = associate_trajectories(a, b, 0.02);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == std::pair<size_t, size_t>{0, 0});

  Trajectory c, d;
  c.append(0.0, Pose::identity());
  d.append(0.02, Pose::identity());
  CHECK(associate_trajectories(c, d, 0.02).size() == 1);
  Trajectory e;
  e.append(0.021, Pose::identity());
  CHECK(associate_trajectories(c, e, 0.02).empty());
}

TEST_CASE("ate of a rigidly moved copy is zero") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> gt_pts;
    for (int i = 0; i < 12; ++i) gt_pts.push_back(Vec3(u(rng), u(rng), u(rng)));
    const Pose C = random_pose(rng, 3.0);
    std::vector<Vec3> est_pts;
    for (const Vec3& p : gt_pts) est_pts.push_back(C * p);
    CHECK(ate_rmse(from_points(est_pts), from_points(gt_pts)) < 1e-9);
  }
}

TEST_CASE("two-point ate has a closed form") {
  // distances 2 vs 2*sqrt(1+d^2): best alignment leaves sqrt(1+d^2)-1 each
  const double d = 0.3;
  const Trajectory gt = from_points({Vec3(-1, 0, 0), Vec3(1, 0, 0)});
  const Trajectory est = from_points({Vec3(-1, 0, -d), Vec3(1, 0, d)});
  const double want = std::sqrt(1 + d * d) - 1.0;
  CHECK(ate_rmse(est, gt) == doctest::Approx(want).epsilon(1e-9));
  // the in-test reference must agree on this case too
  CHECK(horn_rmse({Vec3(-1, 0, -d), Vec3(1, 0, d)},
                  {Vec3(-1, 0, 0), Vec3(1, 0, 0)}) ==
        doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("ate matches the quaternion reference on noisy clouds") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(-2, 2);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + int(rng() % 30);
    std::vector<Vec3> gt_pts, est_pts;
    const Pose C = random_pose(rng, 2.0);
    for (int i = 0; i < n; ++i) {
      const Vec3 g(u(rng), u(rng), u(rng));
      gt_pts.push_back(g);
      est_pts.push_back(C * g + Vec3(noise(rng), noise(rng), noise(rng)));
    }
    const double lib = ate_rmse(from_points(est_pts), from_points(gt_pts));
    const double ref = horn_rmse(est_pts, gt_pts);
    CHECK(std::abs(lib - ref) < 1e-9);
  }
}

TEST_CASE("ate is invariant to rigid remapping of either side") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-2, 2);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<Vec3> gt_pts, est_pts;
  for (int i = 0; i < 15; ++i) {
    const Vec3 g(u(rng), u(rng), u(rng));
    gt_pts.push_back(g);
    est_pts.push_back(g + Vec3(noise(rng), noise(rng), noise(rng)));
  }
  const double base = ate_rmse(from_points(est_pts), from_points(gt_pts));
  for (int trial = 0; trial < 10; ++trial) {
    const Pose D = random_pose(rng, 5.0);
    std::vector<Vec3> moved;
    for (const Vec3& p : est_pts) moved.push_back(D * p);
    CHECK(std::abs(ate_rmse(from_points(moved), from_points(gt_pts)) - base) <
          1e-9);
  }
}

TEST_CASE("rpe of linear drift is the drift rate") {
  Trajectory gt, est;
  for (int i = 0; i <= 5; ++i) {
    gt.append(double(i), Pose::identity());
    est.append(double(i), Pose(Mat3::Identity(), Vec3(0.1 * i, 0, 0)));
  }
  CHECK(rpe_rmse(est, gt, 1.0) == doctest::Approx(0.1).epsilon(1e-12));
  // per-second normalization: 2 s intervals drift 0.2 but rate stays 0.1
  CHECK(rpe_rmse(est, gt, 2.0) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("degenerate inputs raise TooFewPairsError") {
  Trajectory a, b;
  a.append(0.0, Pose::identity());
  b.append(5.0, Pose::identity());
  CHECK_THROWS_AS(ate_rmse(a, b), TooFewPairsError);
  CHECK_THROWS_AS(rpe_rmse(a, b), TooFewPairsError);
  // associated but no delta-separated intervals
  Trajectory c, d;
  c.append(0.0, Pose::identity());
  c.append(0.01, Pose::identity());
  d.append(0.0, Pose::identity());
  d.append(0.01, Pose::identity());
  CHECK_THROWS_AS(rpe_rmse(c, d, 1.0), TooFewPairsError);
}

}  // TEST_SUITE
