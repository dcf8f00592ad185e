// Command-line front end: run or validate a configuration, or run a
// manufactured-solution convergence study.
//
// Exit status: 0 success, 1 configuration error, 2 solver failure.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "pnpf/config.hpp"
#include "pnpf/error.hpp"
#include "pnpf/experiments.hpp"
#include "pnpf/mesh.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigFailure = 1;
constexpr int kSolverFailure = 2;

bool caused_by_input(pnpf::Errc c) {
  using pnpf::Errc;
  return c == Errc::ConfigError || c == Errc::NonpositiveConstant || c == Errc::ZeroResolution ||
         c == Errc::DegenerateGeometry;
}

pnpf::RunConfig load(const std::string& path, const std::vector<std::string>& overrides, const std::string& out,
                     double dt) {
  std::ifstream in(path);
  if (!in) pnpf::fail(pnpf::Errc::ConfigError, "cannot open " + path);
  std::vector<std::string> all = overrides;
  if (!out.empty()) all.push_back("run.output=" + out);
  if (dt > 0.0) all.push_back(fmt::format("timestep.dt={}", dt));
  return pnpf::load_config(in, all);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-volume Poisson-Nernst-Planck-Fourier simulator"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::vector<std::string> overrides;
  double dt = 0.0;
  int scheme = 1, levels = 4;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", out, "Output directory (overrides run.output)");
    cmd->add_option("--dt", dt, "Time step (overrides timestep.dt)")->check(CLI::PositiveNumber);
    cmd->add_option("--override", overrides, "section.key=value, repeatable");
  };

  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a configuration file");
  run->add_option("config", config_path, "Configuration file")->required();
  add_common(run);

  CLI::App* validate = app.add_subcommand("validate", "Check a configuration and print the resolved manifest");
  validate->add_option("config", config_path, "Configuration file")->required();
  add_common(validate);

  CLI::App* mms = app.add_subcommand("mms", "Manufactured-solution convergence study on the unit square");
  mms->add_option("--scheme", scheme, "1 (first order) or 2 (second order)")->check(CLI::IsMember({1, 2}));
  mms->add_option("--levels", levels, "Number of meshes 8, 16, 32, ...")->check(CLI::Range(3, 8));
  mms->add_option("--out", out, "Output directory");
  mms->add_option("--override", overrides, "section.key=value, repeatable");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mms) {
      pnpf::RunConfig cfg;
      cfg.experiment = pnpf::Experiment::Accuracy;
      cfg.scheme = scheme;
      cfg.output = out.empty() ? "out/accuracy" : out;
      cfg.mms.levels.clear();
      for (int k = 0; k < levels; ++k) cfg.mms.levels.push_back(8 << k);
      for (const std::string& o : overrides) pnpf::apply_override(cfg, o);
      cfg.validate();
      const auto rows = pnpf::run_accuracy(cfg, cfg.output);
      pnpf::mms::write_convergence_csv(std::cout, rows);
      return kOk;
    }

    const pnpf::RunConfig cfg = load(config_path, overrides, out, dt);
    if (*validate) {
      if (cfg.experiment != pnpf::Experiment::Accuracy) {
        const pnpf::Mesh mesh = pnpf::build_mesh(cfg.geometry);
        std::cerr << fmt::format("mesh: {} volumes, {} edges, regularity {:.3f}\n", mesh.num_volumes(),
                                 mesh.num_edges(), pnpf::check_regularity(mesh).c0);
      }
      pnpf::write_manifest(std::cout, cfg);
      return kOk;
    }
    pnpf::run_experiment(cfg);
    std::cerr << "wrote " << cfg.output << '\n';
    return kOk;
  } catch (const pnpf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return caused_by_input(e.code()) ? kConfigFailure : kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
}
