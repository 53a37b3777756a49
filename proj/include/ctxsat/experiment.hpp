#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctxsat/datagen.hpp"
#include "ctxsat/eval.hpp"
#include "ctxsat/milp.hpp"
#include "ctxsat/sls.hpp"

namespace ctxsat {

// External MILP solver failed or produced nothing usable.
struct ExternalSolverError : Error {
    using Error::Error;
};

std::string code_identity();

struct MilpSettings {
    int m = 2;
    int refine_rounds = 3;
    std::string solver_cmd;  // template with {lp} and {sol}; empty selects the built-in fallback
};

struct MetricSettings {
    std::size_t regret_samples = 1000;
    std::optional<double> r_max;
};

struct ExperimentConfig {
    GenSpec generation;
    CandidateHint hint{4, 4};
    SlsConfig learner;
    MilpSettings milp;
    MetricSettings metrics;
    std::string output_dir = "out";
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int jobs = 1;

    void validate() const;
};

// Fields absent from the document keep their defaults; unknown keys are an ArgumentError.
ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base = {});
std::string config_to_json(const ExperimentConfig& config);

std::string generation_summary(const GeneratedInstance& instance);

std::string trace_csv(const LearnResult& result);
std::string learn_manifest(const ExperimentConfig& config, const LearnResult& result, const std::string& dataset);

// One evaluated run; the shared CSV schema of evaluate and trends.
struct RunRow {
    std::uint64_t seed = 0;
    int n = 0;
    int m_hard = 0;
    int m_soft = 0;
    std::size_t contexts = 0;
    std::string strategy;
    double cutoff = 0.0;
    EvalReport report;
    std::optional<double> elapsed;
};
std::string csv_header();
std::string csv_row(const RunRow& row);
// Appends lines to path; the header goes in only when the file is new or empty.
void append_csv(const std::string& path, const std::string& header, const std::vector<std::string>& lines);

EvalReport evaluate_run(const MaxSatModel& learned, const MaxSatModel& truth, const Dataset& data,
                        const ExperimentConfig& config, std::uint64_t seed);

struct MilpRound {
    double objective = 0.0;
    std::vector<milp::Mismatch> mismatches;
    std::vector<std::string> warnings;
};
struct MilpOutcome {
    std::optional<MaxSatModel> model;
    std::string lp;  // LP text of the last round
    std::vector<MilpRound> rounds;
    int score = 0;
    std::string report;
};
// Encodes, solves (external command or fallback), decodes and refines up to refine_rounds times.
// `work_stem` names the LP/solution files handed to an external solver.
MilpOutcome run_milp(const Dataset& data, const MilpSettings& settings, const std::string& work_stem,
                     const SolverOptions& opts = {});

struct TrendRow {
    std::string suite;
    std::string level;
    RunRow run;
};
struct TrendAggregate {
    std::string suite;
    std::string level;
    std::size_t runs = 0;
    double score_mean = 0.0, score_sd = 0.0;
    double accuracy_mean = 0.0, accuracy_sd = 0.0;
    double infeasibility_mean = 0.0, infeasibility_sd = 0.0;
    std::optional<double> regret_mean, regret_sd;
    double elapsed_mean = 0.0;
};
struct TrendResult {
    std::vector<TrendRow> rows;
    std::vector<TrendAggregate> aggregates;
};
std::vector<std::string> trend_suites();
// Rows come back in (level, seed) order whatever the job count.
TrendResult run_trends(const std::string& suite, const ExperimentConfig& config,
                       const std::function<void(const TrendRow&)>& progress = {});
std::string trend_header();
std::string trend_row(const TrendRow& row);
std::string aggregate_header();
std::string aggregate_row(const TrendAggregate& a);

}  // namespace ctxsat
