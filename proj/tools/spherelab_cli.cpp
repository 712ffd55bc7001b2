#include <spherelab/runner.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <map>

namespace {

bool is_config_error(spherelab::ErrorKind k)
{
  using spherelab::ErrorKind;
  return k == ErrorKind::config_invalid || k == ErrorKind::ellipticity_violation || k == ErrorKind::out_of_configuration_set;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"spherelab: concentrating radial layers for -eps^2 Lap u + (1 + eps^2 V) u = u^p"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out_dir = "out";
  std::optional<double> eps;
  std::optional<int> rho_samples;
  const std::map<std::string, std::string> about{
      {"ground", "1D ground-state constants, identities and shooting check"},
      {"spectrum", "linearized spectrum at the ground state"},
      {"mpot", "effective potential M and its critical radius per eps"},
      {"scan", "reduced-energy scan, rho*, and the matched-radius discrepancy sweep"},
      {"solve", "full solve at one eps with identity audits"},
      {"continue", "continuation along the eps schedule"},
      {"normalize", "continuation plus the mass-constrained back-map and trends"},
      {"report", "summarize the run ledger in --out"}};
  for (const auto& name : spherelab::subcommands()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    if (name != "report") sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    if (name != "report" && name != "ground" && name != "spectrum") {
      sub->add_option("--eps", eps, "single eps instead of the configured schedule");
      sub->add_option("--rho-samples", rho_samples, "scan sample count");
    }
  }
  CLI11_PARSE(app, argc, argv);
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    spherelab::RunConfig cfg;
    if (!config_path.empty()) cfg = spherelab::load_config(config_path);
    else spherelab::validate(cfg);
    auto rec = spherelab::run(name, cfg, out_dir, {eps, rho_samples});
    for (const auto& [check, ok] : rec.checks) std::cout << (ok ? "ok   " : "FAIL ") << check << "\n";
    std::cout << rec.outputs.size() << " files written to " << out_dir << " (config " << rec.config_hash << ")\n";
    return 0;
  } catch (const spherelab::Error& e) {
    std::cerr << "error [" << spherelab::to_string(e.kind()) << "]: " << e.what() << "\n";
    return is_config_error(e.kind()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
