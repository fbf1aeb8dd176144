#include <set>

#include "hg/io.hpp"
#include "json.hpp"

namespace hg {

using ojson = nlohmann::ordered_json;

namespace {

// Reads fields from a JSON object, rejecting unknown keys and type mismatches.
class Reader {
public:
    Reader(const ojson& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail("expected an object");
    }

    template <typename T>
    void field(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(std::string("field \"") + key + "\" has the wrong type");
        }
    }

    void optional_field(const char* key, std::optional<double>& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const ojson& v = j_.at(key);
        if (v.is_null()) out.reset();
        else if (v.is_number()) out = v.get<double>();
        else fail(std::string("field \"") + key + "\" must be a number or null");
    }

    const ojson* object(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [k, _] : j_.items())
            if (!seen_.count(k)) fail("unknown key \"" + k + "\"");
    }

    [[noreturn]] void fail(const std::string& msg) const { throw std::invalid_argument(where_ + ": " + msg); }

private:
    const ojson& j_;
    std::string where_;
    std::set<std::string> seen_;
};

ojson parse(const std::string& text, const std::string& where) {
    try {
        return ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(where + ": invalid JSON: " + e.what());
    }
}

ojson model_json(const ModelConfig& c) {
    ojson j;
    j["num_stacks"] = c.num_stacks;
    j["num_features"] = c.num_features;
    j["num_joints"] = c.num_joints;
    j["hourglass_depth"] = c.hourglass_depth;
    j["modules_per_location"] = c.modules_per_location;
    j["input_resolution"] = c.input_resolution;
    j["output_resolution"] = c.output_resolution;
    return j;
}

ModelConfig read_model(const ojson& j) {
    ModelConfig c;
    Reader r(j, "model config");
    r.field("num_stacks", c.num_stacks);
    r.field("num_features", c.num_features);
    r.field("num_joints", c.num_joints);
    r.field("hourglass_depth", c.hourglass_depth);
    r.field("modules_per_location", c.modules_per_location);
    r.field("input_resolution", c.input_resolution);
    r.field("output_resolution", c.output_resolution);
    r.finish();
    c.validate();
    return c;
}

ojson train_json(const TrainConfig& c) {
    ojson j;
    j["learning_rate"] = c.learning_rate;
    j["lr_drop_factor"] = c.lr_drop_factor;
    j["plateau_patience"] = c.plateau_patience;
    j["rotation_max_deg"] = c.rotation_max_deg;
    j["scale_min"] = c.scale_min;
    j["scale_max"] = c.scale_max;
    j["sigma_px"] = c.sigma_px;
    j["augment"] = c.augment;
    j["flip_augment"] = c.flip_augment;
    j["batch_size"] = c.batch_size;
    j["max_iterations"] = c.max_iterations;
    j["eval_interval"] = c.eval_interval;
    j["checkpoint_interval"] = c.checkpoint_interval;
    j["intermediate_supervision"] = c.intermediate_supervision;
    j["stop_at_accuracy"] = c.stop_at_accuracy ? ojson(*c.stop_at_accuracy) : ojson(nullptr);
    j["pck_threshold"] = c.pck_threshold;
    j["workers"] = c.workers;
    j["seed"] = c.seed;
    j["rmsprop_alpha"] = c.rmsprop_alpha;
    j["rmsprop_epsilon"] = c.rmsprop_epsilon;
    return j;
}

TrainConfig read_train(const ojson& j) {
    TrainConfig c;
    Reader r(j, "train config");
    r.field("learning_rate", c.learning_rate);
    r.field("lr_drop_factor", c.lr_drop_factor);
    r.field("plateau_patience", c.plateau_patience);
    r.field("rotation_max_deg", c.rotation_max_deg);
    r.field("scale_min", c.scale_min);
    r.field("scale_max", c.scale_max);
    r.field("sigma_px", c.sigma_px);
    r.field("augment", c.augment);
    r.field("flip_augment", c.flip_augment);
    r.field("batch_size", c.batch_size);
    r.field("max_iterations", c.max_iterations);
    r.field("eval_interval", c.eval_interval);
    r.field("checkpoint_interval", c.checkpoint_interval);
    r.field("intermediate_supervision", c.intermediate_supervision);
    r.optional_field("stop_at_accuracy", c.stop_at_accuracy);
    r.field("pck_threshold", c.pck_threshold);
    r.field("workers", c.workers);
    r.field("seed", c.seed);
    r.field("rmsprop_alpha", c.rmsprop_alpha);
    r.field("rmsprop_epsilon", c.rmsprop_epsilon);
    r.finish();
    c.validate();
    return c;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) { return model_json(config).dump(2); }
ModelConfig model_config_from_json(const std::string& text) { return read_model(parse(text, "model config")); }
std::string train_config_to_json(const TrainConfig& config) { return train_json(config).dump(2); }
TrainConfig train_config_from_json(const std::string& text) { return read_train(parse(text, "train config")); }

ExperimentConfig experiment_config_from_json(const std::string& text) {
    const ojson j = parse(text, "experiment config");
    ExperimentConfig c;
    Reader r(j, "experiment config");
    if (const ojson* m = r.object("model")) c.model = read_model(*m);
    if (const ojson* t = r.object("train")) c.train = read_train(*t);
    r.field("train_data", c.train_data);
    r.field("validation_data", c.validation_data);
    r.field("output_dir", c.output_dir);
    r.field("seed", c.seed);
    r.finish();
    return c;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
    ojson j;
    j["model"] = model_json(c.model);
    j["train"] = train_json(c.train);
    j["train_data"] = c.train_data;
    j["validation_data"] = c.validation_data;
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed;
    return j.dump(2);
}

ExperimentConfig read_experiment_config(const fs::path& path) {
    return experiment_config_from_json(read_text(path));
}

}  // namespace hg
