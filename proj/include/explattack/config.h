#ifndef EXPLATTACK_CONFIG_H_
#define EXPLATTACK_CONFIG_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "explattack/attack.h"
#include "explattack/corpus.h"
#include "explattack/eval.h"

namespace explattack {

// Every CLI flag --<name> has a config-file key <name>. Values are strings;
// typed accessors parse on demand and raise UsageError.
struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
  std::vector<std::string> commands;  // subcommands that read the key
};

const std::vector<ConfigKey>& ConfigKeys();
const ConfigKey* FindConfigKey(std::string_view name);

// Lowest to highest precedence.
enum class ConfigLayer { kDefault, kEnvironment, kFile, kFlag };

class Config {
 public:
  // Defaults plus EXPLATTACK_SEED from the process environment.
  static Config WithEnvironment();

  void Set(std::string_view key, std::string_view value, ConfigLayer layer = ConfigLayer::kFlag);
  // key=value lines, '#' starts a comment, blank lines ignored.
  void LoadText(std::string_view text);
  void LoadFile(const std::string& path);

  std::string Get(std::string_view key) const;
  ConfigLayer LayerOf(std::string_view key) const;

  double GetDouble(std::string_view key) const;
  long long GetInt(std::string_view key) const;
  std::uint64_t GetUint(std::string_view key) const;

  // Effective value of every key, registry order.
  Json Echo() const;

 private:
  std::map<std::string, std::string, std::less<>> layers_[4];
};

AttackConfig ToAttackConfig(const Config& config);
ColumnMap ToColumnMap(const Config& config);
TrainOptions ToTrainOptions(const Config& config);
RemoteOptions ToRemoteOptions(const Config& config);

// UsageError unless the path named by `key` is set and exists.
std::string RequireExistingPath(const Config& config, std::string_view key);

}  // namespace explattack

#endif  // EXPLATTACK_CONFIG_H_
