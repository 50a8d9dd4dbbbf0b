#include <CLI11.hpp>
#include <ostream>
#include <sstream>

#include "cli.hpp"

namespace qml::cli {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"qml: fold-type restriction estimates toolkit"};
  app.require_subcommand(1, 1);
  RunOptions opt;
  std::uint64_t seed = 0;
  for (const auto& name : commands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "JSON experiment config")->required();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", seed, "RNG seed, overrides the config seed");
    sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    std::ostringstream o, x;
    app.exit(e, o, x);
    out << o.str();
    return kPass;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, x;
    const int rc = app.exit(e, o, x);
    out << o.str();
    err << x.str();
    return rc == 0 ? kPass : kConfigError;
  }
  CLI::App* sub = app.get_subcommands().front();
  opt.command = sub->get_name();
  if (sub->count("--seed")) opt.seed = seed;
  return run(opt, err);
}

}  // namespace qml::cli
