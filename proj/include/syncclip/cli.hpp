#ifndef SYNCCLIP_CLI_HPP_
#define SYNCCLIP_CLI_HPP_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "syncclip/evaluation.hpp"
#include "syncclip/text_config.hpp"
#include "syncclip/training.hpp"

namespace syncclip {

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2, kExitIo = 3 };

int exit_code_for(ErrorKind kind);

/// Everything one command needs, resolved from defaults, the dataset
/// registry, the config file, --set overrides and the environment.
struct RunConfig {
  std::string dataset = "toy";
  std::optional<std::filesystem::path> registry_file;
  std::filesystem::path real_root;
  std::filesystem::path synth_root;  // empty: no synthetic data
  std::filesystem::path out_dir = "runs/latest";
  std::optional<std::filesystem::path> backbone;  // archive; toy encoders otherwise
  std::uint64_t toy_backbone_seed = 1;
  Method method = Method::kSyncClip;
  int metanet_hidden = 0;
  Protocol protocol = Protocol::kGzsl;
  PromptConfig prompts;
  TrainConfig train;
  DatasetEntry entry;
  TextConfig source;  // merged file and overrides, before defaults

  /// The resolved values in config-file form.
  TextConfig effective() const;
};

/// Environment variable that roots relative dataset paths.
inline constexpr const char* kDataRootEnv = "SYNCCLIP_DATA_ROOT";

/// Resolution order: built-in defaults, registry loss weights for the
/// dataset, the config file, then `overrides` left to right. Unknown keys
/// and every constraint violation are reported together as one kConfig.
RunConfig resolve_run_config(const std::optional<std::filesystem::path>& config_file,
                             const std::vector<std::string>& overrides);

DualEncoder<double> load_backbone(const RunConfig& rc);

/// Fills prompt depth and widths the config left unset from the backbone,
/// then checks the geometry fits it.
void fit_prompts_to_backbone(RunConfig& rc, const DualEncoder<double>& encoders);

/// Runs one command line (without the program name). Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace syncclip

#endif  // SYNCCLIP_CLI_HPP_
