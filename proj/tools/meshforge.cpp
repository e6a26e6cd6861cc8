// Copyright 2026 The MeshForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// meshforge: command-line front end for the video-to-mesh pipeline.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "meshforge/fixtures.hpp"
#include "meshforge/service.hpp"

namespace mf = meshforge;

namespace {

struct Globals {
  std::string config;
  std::string output_dir;
  int threads = 1;
  std::optional<uint64_t> seed;
};

mf::PipelineConfig Load(const Globals& g) {
  if (g.config.empty()) throw mf::Error(mf::Errc::kConfig, "--config is required");
  std::optional<mf::fs::path> out;
  if (!g.output_dir.empty()) out = mf::fs::path(g.output_dir);
  mf::PipelineConfig cfg = mf::LoadConfig(g.config, out);
  cfg.threads = mf::ResolveThreads(g.threads);
  if (g.seed) cfg.eval.seed = *g.seed;
  return cfg;
}

std::vector<std::string> Targets(const mf::PipelineConfig& cfg, const std::string& only) {
  if (!only.empty()) return {cfg.Bundle(only).id};
  std::vector<std::string> ids;
  for (const auto& b : cfg.bundles) ids.push_back(b.id);
  return ids;
}

void PrintReport(const mf::EvalReport& r) {
  for (const auto& f : r.per_frame)
    std::printf("frame %d  mae %.6f  rmse %.6f  psnr %.3f dB\n", f.frame_id, f.metrics.mae, f.metrics.rmse,
                f.metrics.psnr);
  for (int f : r.excluded) std::printf("frame %d  excluded (coverage)\n", f);
  std::printf("aggregate  mae %.6f  rmse %.6f  psnr %.3f dB\n", r.aggregate.mae, r.aggregate.rmse, r.aggregate.psnr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshforge: metric-scale mesh extraction, registration and evaluation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Pipeline configuration (JSON)");
  app.add_option("--output-dir", g.output_dir, "Override the configured output directory");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Override the evaluation frame-sampling seed");

  std::string bundle;
  auto* mesh = app.add_subcommand("mesh", "Extract, shade and colorize fragment meshes");
  mesh->add_option("--bundle", bundle, "Only this bundle");
  auto* scale = app.add_subcommand("scale", "Recover metric scale from marker observations");
  scale->add_option("--bundle", bundle, "Only this bundle");

  std::string source, target;
  auto* reg = app.add_subcommand("register", "Register fragment pairs (coarse + ICP)");
  reg->add_option("--source", source, "Source fragment id (default: every declared pair)");
  reg->add_option("--target", target, "Target fragment id");

  app.add_subcommand("merge", "Merge registered fragments through a joint field");

  std::string eval_target, eval_bundle;
  auto* eval = app.add_subcommand("eval", "Rerender a mesh and compare against frames");
  eval->add_option("--target", eval_target, "fragment, scaled or merged")
      ->check(CLI::IsMember({"fragment", "scaled", "merged"}));
  eval->add_option("--bundle", eval_bundle, "Bundle whose frames are used");

  std::string host = "127.0.0.1", static_dir;
  std::optional<int> port;
  auto* serve = app.add_subcommand("serve", "Run the local service for the correspondence picker");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (default: $MESHFORGE_PORT or 8765)");
  serve->add_option("--static", static_dir, "Directory served under /");

  std::string kind, fixture_out, field_kind = "analytic";
  double rho = 1.0, view_gain = 0.0;
  auto* gen = app.add_subcommand("gen-fixture", "Write a synthetic scene as a project directory");
  gen->add_option("kind", kind, "scale, sphere or halves")->required()->check(CLI::IsMember({"scale", "sphere", "halves"}));
  gen->add_option("--out", fixture_out, "Destination directory")->required();
  gen->add_option("--rho", rho, "Metric-to-reconstruction ratio (scale)")->capture_default_str();
  gen->add_option("--field", field_kind, "analytic or grid (scale)")->check(CLI::IsMember({"analytic", "grid"}));
  gen->add_option("--view-gain", view_gain, "View dependence in [0, 1] (sphere)")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      mf::Fixture fx = kind == "scale"    ? mf::ScaleFixture(rho, field_kind == "grid")
                       : kind == "sphere" ? mf::SphereFixture(view_gain)
                                          : mf::HalvesFixture();
      std::printf("%s\n", mf::WriteFixture(fx, fixture_out).string().c_str());
      return 0;
    }
    mf::PipelineConfig cfg = Load(g);
    if (*mesh) {
      for (const auto& id : Targets(cfg, bundle)) {
        auto m = mf::RunMesh(cfg, id);
        std::printf("%s: %zu vertices, %zu faces\n", id.c_str(), m.vertices.size(), m.faces.size());
      }
    } else if (*scale) {
      for (const auto& id : Targets(cfg, bundle)) {
        auto est = mf::RunScale(cfg, id);
        std::printf("%s: mean scale %.12g over %zu frame(s)\n", id.c_str(), est.mean_scale, est.per_frame.size());
      }
    } else if (*reg) {
      if (source.empty() != target.empty()) throw mf::Error(mf::Errc::kConfig, "give both --source and --target");
      std::vector<std::pair<std::string, std::string>> pairs;
      if (!source.empty())
        pairs.emplace_back(source, target);
      else
        for (const auto& c : cfg.correspondences) pairs.emplace_back(c.source, c.target);
      if (pairs.empty()) throw mf::Error(mf::Errc::kConfig, "no correspondence pairs declared");
      for (const auto& [s, t] : pairs) {
        auto r = mf::RegisterPair(cfg, s, t);
        std::printf("%s -> %s: rmse %.6g after %d iteration(s)%s%s\n", s.c_str(), t.c_str(), r.icp.rmse,
                    r.icp.iterations, r.diagnostics.empty() ? "" : "; ", r.diagnostics.c_str());
      }
    } else if (app.got_subcommand("merge")) {
      auto m = mf::RunMerge(cfg);
      std::printf("merged: %zu vertices, %zu faces -> %s\n", m.mesh.vertices.size(), m.mesh.faces.size(),
                  cfg.Output(mf::MergedPath()).string().c_str());
    } else if (*eval) {
      if (!eval_target.empty())
        cfg.eval.target = eval_target == "fragment" ? mf::EvalTarget::kFragment
                          : eval_target == "scaled" ? mf::EvalTarget::kScaled
                                                    : mf::EvalTarget::kMerged;
      if (!eval_bundle.empty()) cfg.eval.bundle = cfg.Bundle(eval_bundle).id;
      PrintReport(mf::RunEval(cfg));
    } else if (*serve) {
      const int p = port ? *port : mf::PortFromEnvironment();
      mf::Service svc(cfg, static_dir);
      std::printf("serving %s on http://%s:%d\n", cfg.output_dir.string().c_str(), host.c_str(), p);
      std::fflush(stdout);
      if (!svc.Listen(host, p)) throw mf::Error(mf::Errc::kIo, "cannot listen on " + host + ":" + std::to_string(p));
    }
  } catch (const mf::Error& e) {
    std::fprintf(stderr, "meshforge: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "meshforge: %s\n", e.what());
    return 1;
  }
  return 0;
}
