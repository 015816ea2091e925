#pragma once

// Model x fairness-option composition used by the CLI and the experiment runner.

#include "fairagg/aggregation.hpp"
#include "fairagg/fairness.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace fairagg {

enum class ModelKind { mv, ds, soft_ds };
enum class FairnessOption { none, weighting, splitting, groupanno_1, groupanno_2 };

std::string_view to_string(ModelKind model);
std::string_view to_string(FairnessOption option);
/// Throws ConfigError on unknown names.
ModelKind parse_model(std::string_view name);
FairnessOption parse_fairness(std::string_view name);

/// Throws ConfigError when GroupAnno is paired with majority voting.
void check_combination(ModelKind model, FairnessOption option);

struct ModelSettings {
    DirichletHyper hyper = DirichletHyper::flat(2);
    DsFitOptions ds;
    SoftDsOptions soft_ds;
    GroupAnnoOptions groupanno;
};

/// Plain aggregation procedure for one model kind.
Aggregator make_aggregator(ModelKind model, const ModelSettings& settings);

struct AggregateResult {
    SoftLabels soft_labels;
    std::vector<std::string> warnings;
};

/// Runs `model` with fairness option `option`. `attrs` may be null only when
/// `option` is none.
AggregateResult aggregate(const LabelMatrix& data, const AttributeTable* attrs, ModelKind model,
                          FairnessOption option, const ModelSettings& settings);

}  // namespace fairagg
