#include "fairagg/pipeline.hpp"

namespace fairagg {

std::string_view to_string(ModelKind model) {
    switch (model) {
        case ModelKind::mv: return "mv";
        case ModelKind::ds: return "ds";
        case ModelKind::soft_ds: return "soft_ds";
    }
    return "?";
}

std::string_view to_string(FairnessOption option) {
    switch (option) {
        case FairnessOption::none: return "none";
        case FairnessOption::weighting: return "weighting";
        case FairnessOption::splitting: return "splitting";
        case FairnessOption::groupanno_1: return "groupanno_1";
        case FairnessOption::groupanno_2: return "groupanno_2";
    }
    return "?";
}

ModelKind parse_model(std::string_view name) {
    for (auto m : {ModelKind::mv, ModelKind::ds, ModelKind::soft_ds}) {
        if (to_string(m) == name) return m;
    }
    throw ConfigError("unknown model '" + std::string(name) + "' (expected mv, ds or soft_ds)");
}

FairnessOption parse_fairness(std::string_view name) {
    for (auto f : {FairnessOption::none, FairnessOption::weighting, FairnessOption::splitting,
                   FairnessOption::groupanno_1, FairnessOption::groupanno_2}) {
        if (to_string(f) == name) return f;
    }
    throw ConfigError("unknown fairness option '" + std::string(name) + "'");
}

void check_combination(ModelKind model, FairnessOption option) {
    if ((option == FairnessOption::groupanno_1 || option == FairnessOption::groupanno_2) && model == ModelKind::mv) {
        throw ConfigError("GroupAnno requires the ds or soft_ds model");
    }
}

Aggregator make_aggregator(ModelKind model, const ModelSettings& settings) {
    switch (model) {
        case ModelKind::mv:
            return [](const WeightedLabels& d) { return mv_aggregate(d); };
        case ModelKind::ds:
            return [opts = settings.ds](const WeightedLabels& d) { return ds_fit(d, opts).state.posteriors; };
        case ModelKind::soft_ds:
            return [hyper = settings.hyper, opts = settings.soft_ds](const WeightedLabels& d) {
                return soft_ds_fit(d, hyper, opts).state.posteriors;
            };
    }
    throw ConfigError("unknown model");
}

AggregateResult aggregate(const LabelMatrix& data, const AttributeTable* attrs, ModelKind model,
                          FairnessOption option, const ModelSettings& settings) {
    check_combination(model, option);
    if (option != FairnessOption::none && attrs == nullptr) {
        throw ConfigError("fairness option '" + std::string(to_string(option)) + "' needs voter attributes");
    }
    AggregateResult result;
    switch (option) {
        case FairnessOption::none:
            result.soft_labels = make_aggregator(model, settings)(WeightedLabels::unit(data));
            break;
        case FairnessOption::weighting:
            result.soft_labels = make_aggregator(model, settings)(sample_weights(data, *attrs));
            break;
        case FairnessOption::splitting: {
            auto split = split_aggregate(data, *attrs, make_aggregator(model, settings));
            result.soft_labels = std::move(split.soft_labels);
            for (auto& w : split.warnings) result.warnings.push_back(std::move(w.message));
            break;
        }
        case FairnessOption::groupanno_1:
        case FairnessOption::groupanno_2: {
            const auto base = model == ModelKind::ds ? BaseModel::dawid_skene : BaseModel::soft_dawid_skene;
            const auto output = option == FairnessOption::groupanno_1 ? GroupAnnoOutput::converged
                                                                      : GroupAnnoOutput::group_confusion_reweighted;
            auto opts = settings.groupanno;
            if (base == BaseModel::dawid_skene) {
                opts.tol = settings.ds.tol;
                opts.max_iter = settings.ds.max_iter;
            }
            result.soft_labels = groupanno_fit(data, *attrs, base, settings.hyper, output, opts).soft_labels;
            break;
        }
    }
    return result;
}

}  // namespace fairagg
