// explattack command-line tool. Talks to the library only through the C API.
#include <cstdio>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "explattack/explattack.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Subcommand {
  CLI::App* app = nullptr;
  std::string config_file;
  std::map<std::string, std::string> values;  // key -> flag value
};

int ExitCodeFor(ea_status status) {
  if (status == EA_OK) return 0;
  return status == EA_ERR_USAGE ? kExitUsage : kExitRuntime;
}

int Report(ea_status status) {
  std::fprintf(stderr, "explattack: %s: %s\n", ea_status_name(status), ea_last_error());
  return ExitCodeFor(status);
}

void AddKeyOptions(Subcommand& sub, const char* command) {
  sub.app->add_option("--config", sub.config_file, "key=value config file (flags override it)");
  for (size_t i = 0; i < ea_config_key_count(); ++i) {
    if (!ea_config_key_used_by(i, command)) continue;
    const std::string name = ea_config_key_name(i);
    std::string help = ea_config_key_help(i);
    help += " [default: ";
    help += ea_config_key_default(i);
    help += "]";
    sub.app->add_option("--" + name, sub.values[name], help);
  }
}

// Builds the config handle: defaults < EXPLATTACK_SEED < --config file < flags.
ea_status MakeConfig(const Subcommand& sub, ea_config** out) {
  ea_status st = ea_config_create(out);
  if (st != EA_OK) return st;
  if (!sub.config_file.empty()) {
    st = ea_config_load_file(*out, sub.config_file.c_str());
    if (st != EA_OK) return st;
  }
  for (const auto& [key, value] : sub.values) {
    if (sub.app->count("--" + key) == 0) continue;
    st = ea_config_set(*out, key.c_str(), value.c_str());
    if (st != EA_OK) return st;
  }
  return EA_OK;
}

void LogToStderr(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

int RunAttack(const ea_config* config) {
  ea_summary* summary = nullptr;
  ea_status st = ea_run_attack(config, LogToStderr, nullptr, &summary);
  if (st != EA_OK) return Report(st);
  char* json = nullptr;
  st = ea_summary_to_json(summary, &json);
  if (st == EA_OK) {
    std::fputs(json, stdout);
    ea_string_free(json);
  }
  ea_summary_destroy(summary);
  return st == EA_OK ? 0 : Report(st);
}

int PrintResult(ea_status st, char* text) {
  if (st != EA_OK) return Report(st);
  std::string out = text != nullptr ? text : "";
  ea_string_free(text);
  if (!out.empty() && out.back() != '\n') out += '\n';
  std::fputs(out.c_str(), stdout);
  return 0;
}

std::string KeyTable() {
  std::string out = "\nConfig keys (--<key> on the subcommands, <key>=value in --config files):\n";
  for (size_t i = 0; i < ea_config_key_count(); ++i) {
    out += "  ";
    out += ea_config_key_name(i);
    out += " = ";
    out += ea_config_key_default(i);
    out += "\n";
  }
  out += "\nPrecedence: flags > --config file > EXPLATTACK_SEED (seed only) > defaults.\n";
  out += "Exit codes: 0 success, 1 runtime failure, 2 usage or config error.\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial robustness harness for NLI classifiers and explain-then-predict "
               "pipelines."};
  app.require_subcommand(1);
  app.footer(KeyTable());

  Subcommand attack{app.add_subcommand("attack", "Run an attack campaign")};
  Subcommand train{app.add_subcommand("train", "Train the linear victim")};
  Subcommand score{app.add_subcommand("score-explanations",
                                      "Score generated explanations against references")};
  Subcommand report{app.add_subcommand("report", "Render a table from summary files")};
  AddKeyOptions(attack, "attack");
  AddKeyOptions(train, "train");
  AddKeyOptions(score, "score-explanations");
  AddKeyOptions(report, "report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  Subcommand* active = nullptr;
  for (Subcommand* s : {&attack, &train, &score, &report}) {
    if (s->app->parsed()) active = s;
  }
  ea_config* config = nullptr;
  ea_status st = MakeConfig(*active, &config);
  if (st != EA_OK) {
    ea_config_destroy(config);
    return Report(st);
  }

  int code = 0;
  if (active == &attack) {
    code = RunAttack(config);
  } else {
    char* text = nullptr;
    if (active == &train) {
      st = ea_train(config, &text);
    } else if (active == &score) {
      st = ea_score_explanations(config, &text);
    } else {
      st = ea_render_report(config, &text);
    }
    code = PrintResult(st, text);
  }
  ea_config_destroy(config);
  return code;
}
