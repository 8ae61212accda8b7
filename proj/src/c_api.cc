#include "explattack/explattack.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "explattack/config.h"
#include "explattack/errors.h"
#include "explattack/eval.h"
#include "explattack/workflows.h"

struct ea_config {
  explattack::Config config;
};

struct ea_summary {
  explattack::CampaignResult result;
  std::string json;
};

namespace {

thread_local std::string g_last_error;

ea_status Fail(ea_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
ea_status Guard(Fn&& fn) {
  using namespace explattack;
  try {
    fn();
    g_last_error.clear();
    return EA_OK;
  } catch (const UsageError& e) {
    return Fail(EA_ERR_USAGE, e.what());
  } catch (const IoError& e) {
    return Fail(EA_ERR_IO, e.what());
  } catch (const ParseError& e) {
    return Fail(EA_ERR_PARSE, e.what());
  } catch (const ValidationError& e) {
    return Fail(EA_ERR_VALIDATION, e.what());
  } catch (const VictimError& e) {
    return Fail(EA_ERR_VICTIM, e.what());
  } catch (const IdMismatchError& e) {
    return Fail(EA_ERR_ID_MISMATCH, e.what());
  } catch (const std::exception& e) {
    return Fail(EA_ERR_RUNTIME, e.what());
  } catch (...) {
    return Fail(EA_ERR_RUNTIME, "unknown error");
  }
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ea_status NullArgument(const char* name) {
  return Fail(EA_ERR_USAGE, std::string(name) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* ea_last_error(void) { return g_last_error.c_str(); }

const char* ea_status_name(ea_status status) {
  switch (status) {
    case EA_OK: return "ok";
    case EA_ERR_USAGE: return "usage error";
    case EA_ERR_IO: return "I/O error";
    case EA_ERR_PARSE: return "parse error";
    case EA_ERR_VALIDATION: return "validation error";
    case EA_ERR_VICTIM: return "victim error";
    case EA_ERR_ID_MISMATCH: return "id mismatch";
    case EA_ERR_RUNTIME: return "runtime error";
  }
  return "unknown status";
}

void ea_string_free(char* s) { std::free(s); }

ea_status ea_config_create(ea_config** out) {
  if (out == nullptr) return NullArgument("out");
  *out = nullptr;
  return Guard([&] { *out = new ea_config{explattack::Config::WithEnvironment()}; });
}

void ea_config_destroy(ea_config* config) { delete config; }

ea_status ea_config_set(ea_config* config, const char* key, const char* value) {
  if (config == nullptr || key == nullptr || value == nullptr) return NullArgument("argument");
  return Guard([&] { config->config.Set(key, value, explattack::ConfigLayer::kFlag); });
}

ea_status ea_config_load_file(ea_config* config, const char* path) {
  if (config == nullptr || path == nullptr) return NullArgument("argument");
  return Guard([&] { config->config.LoadFile(path); });
}

ea_status ea_config_get(const ea_config* config, const char* key, char** out) {
  if (config == nullptr || key == nullptr || out == nullptr) return NullArgument("argument");
  return Guard([&] { *out = CopyString(config->config.Get(key)); });
}

size_t ea_config_key_count(void) { return explattack::ConfigKeys().size(); }

const char* ea_config_key_name(size_t index) {
  const auto& keys = explattack::ConfigKeys();
  return index < keys.size() ? keys[index].name.c_str() : nullptr;
}

const char* ea_config_key_default(size_t index) {
  const auto& keys = explattack::ConfigKeys();
  return index < keys.size() ? keys[index].default_value.c_str() : nullptr;
}

const char* ea_config_key_help(size_t index) {
  const auto& keys = explattack::ConfigKeys();
  return index < keys.size() ? keys[index].help.c_str() : nullptr;
}

int ea_config_key_used_by(size_t index, const char* command) {
  const auto& keys = explattack::ConfigKeys();
  if (index >= keys.size() || command == nullptr) return 0;
  for (const auto& c : keys[index].commands) {
    if (c == command) return 1;
  }
  return 0;
}

ea_status ea_run_attack(const ea_config* config, ea_log_fn log, void* user_data,
                        ea_summary** out) {
  if (config == nullptr || out == nullptr) return NullArgument("argument");
  *out = nullptr;
  return Guard([&] {
    explattack::LogFn log_fn;
    if (log != nullptr) log_fn = [log, user_data](const std::string& line) { log(line.c_str(), user_data); };
    auto result = explattack::AttackWorkflow(config->config, log_fn);
    auto* s = new ea_summary{std::move(result), {}};
    s->json = explattack::ReadFile(s->result.summary_path);
    *out = s;
  });
}

void ea_summary_destroy(ea_summary* summary) { delete summary; }

ea_status ea_summary_get(const ea_summary* summary, ea_summary_values* out) {
  if (summary == nullptr || out == nullptr) return NullArgument("argument");
  const auto& s = summary->result.summary;
  *out = {s.total,
          s.attempted,
          s.skipped,
          s.errored,
          s.successes,
          s.original_accuracy,
          s.after_attack_accuracy,
          s.attack_success_rate,
          s.avg_queries_all,
          s.avg_queries_attempted};
  return EA_OK;
}

ea_status ea_summary_to_json(const ea_summary* summary, char** out) {
  if (summary == nullptr || out == nullptr) return NullArgument("argument");
  return Guard([&] { *out = CopyString(summary->json); });
}

ea_status ea_summary_records_path(const ea_summary* summary, char** out) {
  if (summary == nullptr || out == nullptr) return NullArgument("argument");
  return Guard([&] { *out = CopyString(summary->result.records_path); });
}

ea_status ea_train(const ea_config* config, char** out_json) {
  if (config == nullptr || out_json == nullptr) return NullArgument("argument");
  return Guard([&] { *out_json = CopyString(explattack::TrainWorkflow(config->config).dump(2)); });
}

ea_status ea_score_explanations(const ea_config* config, char** out_json) {
  if (config == nullptr || out_json == nullptr) return NullArgument("argument");
  return Guard([&] {
    *out_json = CopyString(explattack::ScoreExplanationsWorkflow(config->config).dump(2));
  });
}

ea_status ea_render_report(const ea_config* config, char** out_markdown) {
  if (config == nullptr || out_markdown == nullptr) return NullArgument("argument");
  return Guard([&] { *out_markdown = CopyString(explattack::ReportWorkflow(config->config)); });
}

ea_status ea_pct_decrease(double baseline_asr, double variant_asr, double* out) {
  if (out == nullptr) return NullArgument("out");
  return Guard([&] { *out = explattack::PctDecrease(baseline_asr, variant_asr); });
}

}  // extern "C"
