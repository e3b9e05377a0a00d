#include "scenarios.hpp"

#include <fte/error.hpp>
#include <fte/synthesis.hpp>
#include <fte/text_io.hpp>

#include <nlohmann/json.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

namespace fte {
namespace {

namespace fs = std::filesystem;

double truncated_normal_std(double sigma, double bound) {
  const double beta = bound / sigma;
  const double pdf = std::exp(-0.5 * beta * beta) / std::sqrt(2.0 * kPi);
  const double mass = std::erf(beta / std::sqrt(2.0));  // 2 Phi(beta) - 1
  return sigma * std::sqrt(1.0 - 2.0 * beta * pdf / mass);
}

SynthesisJob base_job() {
  SynthesisJob job;
  job.demo = testing::transfer_demo();
  job.obstacle_enabled = false;
  job.threads = 1;
  return job;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

TEST(Perturbation, ZeroSpreadIsIdentity) {
  PerturbationSpec spec;
  spec.distribution.translation_bound = Vec3::Constant(0.1);
  spec.distribution.rotation_bound = 0.5;
  const BoundaryPerturbation p = sample_boundary_perturbation(spec, 1, 0);
  EXPECT_EQ(p.dp, Vec3::Zero());
  EXPECT_EQ(p.dq, UnitQuaternion::identity());
}

TEST(Perturbation, DeterministicPerSeedIndexBoundary) {
  PerturbationSpec spec;
  spec.distribution = {Vec3::Constant(0.01), Vec3::Constant(0.03), 0.1, 0.2};
  spec.seed = 99;
  const auto a = sample_boundary_perturbation(spec, 2, 17);
  const auto b = sample_boundary_perturbation(spec, 2, 17);
  EXPECT_EQ(a.dp, b.dp);
  EXPECT_EQ(a.dq, b.dq);
  EXPECT_NE(sample_boundary_perturbation(spec, 2, 18).dp, a.dp);
  EXPECT_NE(sample_boundary_perturbation(spec, 1, 17).dp, a.dp);
  spec.seed = 100;
  EXPECT_NE(sample_boundary_perturbation(spec, 2, 17).dp, a.dp);
}

TEST(Perturbation, TruncatedNormalMoments) {
  PerturbationSpec spec;
  spec.distribution.translation_std = Vec3(0.02, 0.02, 0.0);
  spec.distribution.translation_bound = Vec3(0.05, 0.05, 0.0);
  spec.seed = 7;
  const int n = 10000;
  Vec3 sum = Vec3::Zero();
  Vec3 sum_sq = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3 dp = sample_boundary_perturbation(spec, 1, static_cast<std::size_t>(i)).dp;
    ASSERT_LE(std::abs(dp.x()), 0.05);
    ASSERT_LE(std::abs(dp.y()), 0.05);
    ASSERT_EQ(dp.z(), 0.0);
    sum += dp;
    sum_sq += dp.cwiseAbs2();
  }
  const double expected = truncated_normal_std(0.02, 0.05);
  for (int d = 0; d < 2; ++d) {
    const double mean = sum[d] / n;
    const double std = std::sqrt(sum_sq[d] / n - mean * mean);
    EXPECT_NEAR(std, expected, 0.1 * expected) << "axis " << d;
  }
}

TEST(PerturbationProperty, SamplesRespectBounds) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 0.1);
  for (int trial = 0; trial < 200; ++trial) {
    PerturbationSpec spec;
    spec.seed = rng();
    spec.distribution = {Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)), 10.0 * u(rng),
                         10.0 * u(rng)};
    for (std::size_t i = 0; i < 50; ++i) {
      const auto p = sample_boundary_perturbation(spec, 1 + i % 3, i);
      for (int d = 0; d < 3; ++d) {
        EXPECT_LE(std::abs(p.dp[d]), spec.distribution.translation_bound[d]);
      }
      EXPECT_LE(quat_geodesic_distance(p.dq, UnitQuaternion::identity()),
                spec.distribution.rotation_bound + 1e-12);
    }
  }
}

TEST(Perturbation, TinyBoundRelativeToSpreadStillTerminates) {
  PerturbationSpec spec;
  spec.distribution = {Vec3::Constant(1.0), Vec3::Constant(1e-6), 1.0, 1e-4};
  for (std::size_t i = 0; i < 100; ++i) {
    const auto p = sample_boundary_perturbation(spec, 1, i);
    EXPECT_LE(p.dp.cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(quat_geodesic_distance(p.dq, UnitQuaternion::identity()), 1e-4 + 1e-15);
  }
}

TEST(Perturbation, BodyFrameComposition) {
  const Pose pose{Vec3(1, 2, 3), quat_exp(Vec3(0, 0, kPi / 2))};
  BoundaryPerturbation p;
  p.dp = Vec3(0.1, 0, 0);
  p.dq = quat_exp(Vec3(0.2, 0, 0));
  const Pose out = perturb_pose(pose, p);
  EXPECT_EQ(out.position, Vec3(1.1, 2, 3));
  EXPECT_LT(quat_geodesic_distance(out.orientation, pose.orientation * p.dq), 1e-15);
}

TEST(PerturbationSpec, Validation) {
  PerturbationSpec spec;
  spec.distribution.translation_std = Vec3(-1, 0, 0);
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = {};
  spec.overrides[1].rotation_bound = NAN;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = {};
  EXPECT_FALSE(spec.is_perturbable(0));
  EXPECT_TRUE(spec.is_perturbable(3));
  spec.perturbable = {false, false, true};
  EXPECT_FALSE(spec.is_perturbable(1));
  EXPECT_TRUE(spec.is_perturbable(2));
  EXPECT_FALSE(spec.is_perturbable(5));
}

TEST(Synthesize, PureReproduction) {
  SynthesisJob job = base_job();
  const SynthesisResult result = synthesize(job);
  ASSERT_EQ(result.rollouts.size(), 1u);
  const RolloutRecord& r = result.rollouts[0];
  ASSERT_EQ(r.status, RolloutStatus::kOk);
  EXPECT_LT(r.report.dtw_position, 0.01 * job.demo.arc_length());
  EXPECT_EQ(r.trajectory.segment_count(), job.demo.segment_count());
}

TEST(Synthesize, ChainedSegmentsShareJunctions) {
  SynthesisJob job = base_job();
  job.n_demos = 8;
  job.perturbation.distribution = {Vec3::Constant(0.01), Vec3::Constant(0.02), 0.05, 0.1};
  const SynthesisResult result = synthesize(job);
  for (const auto& r : result.rollouts) {
    ASSERT_EQ(r.status, RolloutStatus::kOk);
    const Trajectory& t = r.trajectory;
    // Reparse the emitted text: junctions are single samples ending one segment and starting the next.
    const Trajectory parsed = parse_trajectory_csv(trajectory_to_csv(t));
    for (std::size_t k = 1; k + 1 < parsed.splits().size(); ++k) {
      const std::size_t j = parsed.splits()[k];
      EXPECT_LT((parsed.segment(k - 1).samples().back().pose.position -
                 parsed.segment(k).samples().front().pose.position)
                    .norm(),
                1e-9);
      // The step across the junction is an ordinary integration step.
      EXPECT_LT((parsed[j + 1].pose.position - parsed[j].pose.position).norm(), 0.02);
      EXPECT_NEAR(parsed[j + 1].time - parsed[j].time, job.dt, 1e-9);
    }
    // Terminal goal reached.
    EXPECT_LT((t.samples().back().pose.position - r.segment_goals.back().position).norm(), 1e-3);
  }
}

TEST(Synthesize, FinalBoundaryOnlyKeepsIntermediatePoses) {
  SynthesisJob job = base_job();
  job.n_demos = 6;
  job.perturbation.distribution = {Vec3::Constant(0.02), Vec3::Constant(0.05), 0.1, 0.2};
  job.perturbation.perturbable = {false, false, true};
  const SynthesisResult result = synthesize(job);
  const Vec3 expert_mid = job.demo[job.demo.splits()[1]].pose.position;
  for (const auto& r : result.rollouts) {
    ASSERT_EQ(r.status, RolloutStatus::kOk);
    ASSERT_EQ(r.perturbations.size(), 1u);
    EXPECT_EQ(r.perturbations[0].boundary, 2u);
    const Vec3 mid = r.trajectory[r.trajectory.splits()[1]].pose.position;
    EXPECT_LT((mid - expert_mid).norm(), 1e-3);
    EXPECT_GT(r.perturbations[0].dp.norm(), 0.0);
  }
}

TEST(Synthesize, GripperFollowsDemoSegments) {
  SynthesisJob job = base_job();
  const SynthesisResult result = synthesize(job);
  const Trajectory& t = result.rollouts[0].trajectory;
  const std::size_t junction = t.splits()[1];
  for (std::size_t i = 0; i < junction; ++i) {
    EXPECT_EQ(t[i].gripper, 0.0);
  }
  for (std::size_t i = junction + 1; i < t.size(); ++i) {
    EXPECT_EQ(t[i].gripper, 1.0);
  }
}

TEST(Synthesize, ExpertWeightsReusedAndHashed) {
  SynthesisJob job = base_job();
  job.n_demos = 3;
  job.perturbation.distribution = {Vec3::Constant(0.01), Vec3::Constant(0.02), 0.05, 0.1};
  const SynthesisResult result = synthesize(job);
  ASSERT_EQ(result.models.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    const DmpModel expert = fit_dmp(job.demo.segment(k), job.dmp);
    EXPECT_EQ(result.model_hashes[k], dmp_model_hash(expert));
    EXPECT_EQ(result.models[k].position_forcing.weights, expert.position_forcing.weights);
  }
  const auto manifest = nlohmann::json::parse(manifest_json(job, result));
  EXPECT_EQ(manifest["model_hashes"][0].get<std::string>(), result.model_hashes[0]);
}

TEST(Synthesize, ThreadCountDoesNotChangeOutput) {
  SynthesisJob job = base_job();
  job.n_demos = 12;
  job.perturbation.distribution = {Vec3::Constant(0.01), Vec3::Constant(0.02), 0.05, 0.1};
  job.perturbation.seed = 5;
  job.threads = 1;
  const SynthesisResult serial = synthesize(job);
  job.threads = 4;
  const SynthesisResult parallel = synthesize(job);
  EXPECT_EQ(manifest_json(job, serial), manifest_json(job, parallel));
  for (std::size_t i = 0; i < serial.rollouts.size(); ++i) {
    EXPECT_EQ(trajectory_to_csv(serial.rollouts[i].trajectory),
              trajectory_to_csv(parallel.rollouts[i].trajectory));
  }
}

TEST(Synthesize, JobValidation) {
  SynthesisJob job = base_job();
  job.n_demos = 0;
  EXPECT_THROW(synthesize(job), std::invalid_argument);
  job = base_job();
  job.dt = 0.05;
  try {
    synthesize(job);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("rollout.dt"), std::string::npos);
  }
  job = base_job();
  job.obstacle_enabled = true;
  EXPECT_THROW(synthesize(job), std::invalid_argument);
}

// Blob beside the expert's final goal and an uncapped return gain far beyond
// the integrator's stability limit: rollouts the blob pushes off the reference
// oscillate to overflow, the rest never deviate and are untouched.
SynthesisJob failing_job() {
  SynthesisJob job = base_job();
  job.n_demos = 20;
  const Vec3 goal = job.demo.samples().back().pose.position;
  job.scene = std::make_shared<const GaussianScene>(testing::single_blob_scene(goal + Vec3(0, 0.03, 0), 0.01));
  job.obstacle_enabled = true;
  job.obstacle.return_gain = 1e12;
  job.obstacle.return_cap = std::numeric_limits<double>::infinity();
  job.perturbation.perturbable = {false, false, true};
  job.perturbation.distribution.translation_std = Vec3(0.0, 0.05, 0.0);
  job.perturbation.distribution.translation_bound = Vec3(0.0, 0.1, 0.0);
  job.perturbation.seed = 3;
  return job;
}

TEST(Synthesize, FailedRolloutsAreRecordedNotResampled) {
  const SynthesisJob job = failing_job();
  const SynthesisResult result = synthesize(job);
  ASSERT_EQ(result.rollouts.size(), job.n_demos);
  const std::size_t failed = result.failed_count();
  EXPECT_GT(failed, 0u);
  EXPECT_LT(failed, job.n_demos);
  for (const auto& r : result.rollouts) {
    if (r.status == RolloutStatus::kFailed) {
      EXPECT_NE(r.error.find("rollout diverged at step"), std::string::npos);
      EXPECT_TRUE(r.trajectory.empty());
    }
  }
}

TEST(Export, WritesOneFilePerSuccessfulRollout) {
  SynthesisJob job = base_job();
  job.n_demos = 3;
  job.perturbation.distribution = {Vec3::Constant(0.01), Vec3::Constant(0.02), 0.05, 0.1};
  const SynthesisResult result = synthesize(job);
  const fs::path dir = fresh_dir("fte_export_ok");
  export_dataset(job, result, dir);
  for (std::size_t i = 0; i < 3; ++i) {
    const Trajectory back = read_trajectory(dir / rollout_file_name(i));
    EXPECT_EQ(trajectory_to_csv(back), trajectory_to_csv(result.rollouts[i].trajectory));
  }
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  EXPECT_EQ(manifest["rollouts"].size(), 3u);
  EXPECT_EQ(manifest["rollouts"][1]["status"], "ok");
  EXPECT_EQ(manifest["rollouts"][1]["file"], "rollout_0001.csv");
  EXPECT_EQ(manifest["seed"], 0u);
  const std::string summary = read_text_file(dir / "summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 4);
  fs::remove_all(dir);
}

TEST(Export, FailedRolloutMarkedAndExcludedFromSummary) {
  const SynthesisJob job = failing_job();
  const SynthesisResult result = synthesize(job);
  const fs::path dir = fresh_dir("fte_export_failed");
  export_dataset(job, result, dir);
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  EXPECT_EQ(manifest["failed"].get<std::size_t>(), result.failed_count());
  const std::string summary = read_text_file(dir / "summary.csv");
  for (const auto& r : result.rollouts) {
    const std::string name = rollout_file_name(r.index);
    const auto& entry = manifest["rollouts"][r.index];
    if (r.status == RolloutStatus::kFailed) {
      EXPECT_EQ(entry["status"], "failed");
      EXPECT_TRUE(entry.contains("error"));
      EXPECT_FALSE(fs::exists(dir / name));
      EXPECT_EQ(summary.find(name), std::string::npos);
    } else {
      EXPECT_TRUE(fs::exists(dir / name));
      EXPECT_NE(summary.find(name), std::string::npos);
    }
  }
  fs::remove_all(dir);
}

TEST(Export, ManifestRecordsBoundedPerturbations) {
  SynthesisJob job = base_job();
  job.n_demos = 10;
  job.perturbation.distribution = {Vec3::Constant(0.01), Vec3(0.02, 0.02, 0.005), 0.1, 0.15};
  job.perturbation.overrides[2] = {Vec3::Constant(0.05), Vec3::Constant(0.01), 0.0, 0.0};
  const SynthesisResult result = synthesize(job);
  const auto manifest = nlohmann::json::parse(manifest_json(job, result));
  for (const auto& entry : manifest["rollouts"]) {
    for (const auto& p : entry["perturbations"]) {
      const auto& d = job.perturbation.distribution_for(p["boundary"].get<std::size_t>());
      for (int i = 0; i < 3; ++i) {
        EXPECT_LE(std::abs(p["dp"][i].get<double>()), d.translation_bound[i]);
      }
      EXPECT_LE(p["angle"].get<double>(), d.rotation_bound + 1e-12);
    }
  }
}

TEST(Export, SameSeedIsByteIdentical) {
  SynthesisJob job = base_job();
  job.n_demos = 4;
  job.perturbation.distribution = {Vec3::Constant(0.01), Vec3::Constant(0.02), 0.05, 0.1};
  job.perturbation.seed = 11;
  const fs::path a = fresh_dir("fte_export_a");
  const fs::path b = fresh_dir("fte_export_b");
  export_dataset(job, synthesize(job), a);
  export_dataset(job, synthesize(job), b);
  for (const auto& entry : fs::directory_iterator(a)) {
    EXPECT_EQ(read_text_file(entry.path()), read_text_file(b / entry.path().filename()))
        << entry.path().filename();
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Export, UnwritableDirectory) {
  SynthesisJob job = base_job();
  const SynthesisResult result = synthesize(job);
  const fs::path file = fresh_dir("fte_export_blocker");
  write_text_file(file, "not a directory");
  EXPECT_THROW(export_dataset(job, result, file / "sub"), ExportError);
  fs::remove_all(file);
  EXPECT_THROW(export_dataset(job, SynthesisResult{}, fresh_dir("fte_export_empty")), ExportError);
}

}  // namespace
}  // namespace fte
