#ifndef EXPLATTACK_WORKFLOWS_H_
#define EXPLATTACK_WORKFLOWS_H_

#include <functional>
#include <string>

#include "explattack/config.h"
#include "explattack/eval.h"

namespace explattack {

// One function per CLI subcommand. Each resolves its resources from the
// config, runs, writes its outputs and returns what the CLI prints.

using LogFn = std::function<void(const std::string&)>;

CampaignResult AttackWorkflow(const Config& config, const LogFn& log = nullptr);

// {"model", "examples", "epochs", "final_loss", "train_accuracy", "warnings"}
Json TrainWorkflow(const Config& config);

// ScoresToJson plus "csv" and "json" output paths.
Json ScoreExplanationsWorkflow(const Config& config);

// Returns the markdown; also writes <report-out>.md and <report-out>.csv.
std::string ReportWorkflow(const Config& config);

// "label=path" or "path" (label = name of the parent directory, or the file
// stem when there is none).
std::vector<std::pair<std::string, std::string>> ParseSummaryList(std::string_view list);

// --timestamp, else SOURCE_DATE_EPOCH, else empty (caller uses the clock).
std::string ResolveTimestamp(const Config& config);

}  // namespace explattack

#endif  // EXPLATTACK_WORKFLOWS_H_
