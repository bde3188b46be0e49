#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "dfindex/report.hpp"

namespace {

std::vector<double> parse_betas(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  std::string item;
  while (std::getline(in, item, ',')) {
    std::istringstream num(item);
    num.imbue(std::locale::classic());
    double v = 0.0;
    if (!(num >> v) || !(num >> std::ws).eof()) {
      throw dfindex::SpecError("cannot parse beta \"" + item + "\"");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampled plurisubharmonicity certificates and torsion conditions on domains in C^2"};
  app.require_subcommand(1);
  std::string config;
  std::string betas;
  for (const char* name : {"certify", "estimate-index", "conditions"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "run configuration (JSON)")->required();
  }
  auto* sweep = app.add_subcommand("worm-sweep", "estimate and bound the index over worm domains");
  sweep->add_option("--config", config, "base configuration (JSON)")->required();
  sweep->add_option("--betas", betas, "comma-separated beta values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return dfindex::exit_code::config_error;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  dfindex::RunConfig cfg;
  try {
    std::ifstream in(config);
    if (!in) throw dfindex::SpecError("cannot read config file " + config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw dfindex::SpecError("config file " + config + " is not valid JSON: " + e.what());
    }
    if (j.is_object()) {
      j["command"] = command;
      if (command == "worm-sweep") j["betas"] = parse_betas(betas);
    }
    cfg = dfindex::RunConfig::from_json(j);
  } catch (const dfindex::SpecError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return dfindex::exit_code::config_error;
  }
  return dfindex::run(cfg, std::cerr);
}
