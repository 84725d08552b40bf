#include <iostream>

#include "CLI11.hpp"
#include "wkb/lab.hpp"
#include "wkb/types.hpp"

namespace {

struct Flags {
  std::string config, out, fixture;
  unsigned long long seed = 0;
  int threads = -1;
  int order = -1;
  double gamma = -1.0;
  int eps_decades = -1;
};

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "run configuration (key = value lines)")->required();
  app->add_option("--out", f.out, "output directory");
  app->add_option("--seed", f.seed, "seed for randomized suites");
  app->add_option("--threads", f.threads, "worker threads, 0 = auto")->check(CLI::NonNegativeNumber);
  app->add_option("--fixture", f.fixture, "fixture file, overrides the config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wkblab: geometric optics and singular-system experiments"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* run_cmd = app.add_subcommand("run", "experiment named by the config");
  add_flags(run_cmd, f);
  for (const std::string& id : wkb::experiment_ids()) {
    CLI::App* sub = app.add_subcommand(id, "run " + id);
    add_flags(sub, f);
    if (id == "cascade" || id == "cascade-weak" || id == "residual-scan")
      sub->add_option("--order", f.order, "cascade order J");
    if (id == "estimate-scan") {
      sub->add_option("--gamma", f.gamma, "gamma, 0 = contraction threshold");
      sub->add_option("--eps-decades", f.eps_decades, "decades of eps");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(wkb::ErrorClass::Config);
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    wkb::RunConfig cfg = wkb::load_config(f.config);
    if (sub != run_cmd) {
      if (!cfg.experiment.empty() && cfg.experiment != sub->get_name())
        throw wkb::config_error("config names experiment '" + cfg.experiment + "' but the command is " +
                                sub->get_name());
      cfg.experiment = sub->get_name();
    }
    if (!f.out.empty()) cfg.out = f.out;
    if (!f.fixture.empty()) cfg.fixture = f.fixture;
    if (sub->count("--seed")) cfg.seed = f.seed;
    if (f.threads >= 0) cfg.threads = f.threads;
    if (f.order >= 0) cfg.params["J"] = f.order;
    if (f.gamma >= 0) cfg.params["gamma"] = f.gamma;
    if (f.eps_decades >= 0) cfg.params["eps_decades"] = f.eps_decades;
    return wkb::run_guarded(cfg, std::cerr);
  } catch (const wkb::Error& e) {
    std::cerr << e.what() << "\n";
    return static_cast<int>(e.cls());
  }
}
