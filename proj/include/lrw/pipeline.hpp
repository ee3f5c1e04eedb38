#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrw/config.hpp"
#include "lrw/heat.hpp"
#include "lrw/kernel.hpp"
#include "lrw/montecarlo.hpp"

namespace lrw {

std::shared_ptr<const MetricMeasureSpace> make_space(const ExperimentConfig& cfg);
RegVaryingFn make_phi(const ExperimentConfig& cfg);
std::shared_ptr<const TransitionKernel> make_kernel(const ExperimentConfig& cfg, std::shared_ptr<const MetricMeasureSpace> space);
/// Shared-table sampler on the configured simulation box when the kernel
/// allows it, per-row tables otherwise.
SamplerTable make_sampler(std::shared_ptr<const TransitionKernel> kernel, const ExperimentConfig& cfg);

/// Least-squares slope of log p against log d.
double loglog_slope(const std::vector<double>& d, const std::vector<double>& p);

struct StageResult {
  std::string stage;
  bool pass = false;
  nlohmann::json summary;
};

/// Runs the subcommands against one output directory. Objects are built
/// lazily and shared between stages of one process; artifacts of earlier
/// stages are required on disk.
class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, std::filesystem::path out, std::ostream& log);

  StageResult audit();
  StageResult build();
  StageResult heat();
  StageResult simulate();
  StageResult verify();

  /// audit | build | heat | simulate | verify | all. Returns 0 when every
  /// verdict passes and 2 otherwise; operational errors propagate.
  int run(const std::string& subcommand);

 private:
  const MetricMeasureSpace& space();
  std::shared_ptr<const TransitionKernel> kernel();
  const std::vector<std::unique_ptr<HeatTable>>& tables();
  void require_artifact(const std::filesystem::path& rel, const std::string& producer) const;

  ExperimentConfig cfg_;
  std::filesystem::path out_;
  std::ostream& log_;
  std::shared_ptr<const MetricMeasureSpace> space_;
  std::shared_ptr<const TransitionKernel> kernel_;
  std::vector<std::unique_ptr<HeatTable>> tables_;
};

}  // namespace lrw
