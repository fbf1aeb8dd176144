#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hg/annotation.hpp"
#include "hg/eval.hpp"
#include "hg/model.hpp"
#include "hg/rmsprop.hpp"
#include "hg/training.hpp"

namespace hg {

namespace fs = std::filesystem;

/// Failure reading or writing a file; the message names the path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- images

ImageU8 read_png(const fs::path& path);
void write_png(const fs::path& path, const ImageU8& image);

// ---- annotations (JSON Lines: one header line, then one line per sample)

/// Parse failure with the 1-based line it occurred on.
struct AnnotationParseError : std::runtime_error {
    AnnotationParseError(std::size_t line, const std::string& what);
    std::size_t line;
};

struct AnnotationFile {
    DatasetHeader header;
    std::vector<Annotation> annotations;
};

AnnotationFile parse_annotations(const std::string& text);
std::string serialize_annotations(const AnnotationFile& file);
AnnotationFile read_annotations(const fs::path& path);

/// Reads the annotation file and every image it references (paths relative to its directory).
Dataset load_dataset(const fs::path& annotation_path);
/// Writes images/<n>.png and annotations.jsonl under `directory`; returns the annotation path.
fs::path export_dataset(const Dataset& data, const fs::path& directory);

inline constexpr const char* kAnnotationFileName = "annotations.jsonl";

// ---- checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    StackedModelParams<float> model;
    RmsPropState<float> optimizer;  // empty before the first step
    std::optional<TrainerState> trainer;
    std::optional<TrainConfig> train_config;
};

/// "HGNET", u32 version, u64 header length, JSON header, then every tensor as
/// little-endian float32 in header order. The header carries a CRC-32 of the payload.
void save_checkpoint(const fs::path& path, StackedModelParams<float>& model, const RmsPropState<float>* optimizer,
                     const TrainerState* trainer, const TrainConfig* train_config);
/// Throws IoError for unreadable, truncated or corrupt files.
Checkpoint load_checkpoint(const fs::path& path);

// ---- configuration

std::string model_config_to_json(const ModelConfig& config);
/// Unknown keys are rejected; missing keys keep their defaults.
ModelConfig model_config_from_json(const std::string& text);

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

struct ExperimentConfig {
    ModelConfig model = ModelConfig::desk_scale();
    TrainConfig train;
    std::string train_data;       // annotation file
    std::string validation_data;  // empty: evaluate on the training set
    std::string output_dir = "run";
    std::uint64_t seed = 1;       // model initialization and training
};

ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig read_experiment_config(const fs::path& path);

// ---- reports

/// %.6g; empty for undefined values.
std::string format_number(std::optional<double> value);

std::string training_log_header(int num_stacks);
std::string training_log_row(const LogRow& row);

/// One row per joint per threshold, plus "Total" rows.
std::string eval_report_csv(const EvalReport& report);
/// Accuracy at the reference threshold in Head, Shoulder, ..., Total columns
/// for all, visible and occluded joints, followed by presence AUCs.
std::string summary_table(const EvalReport& report);
/// PCK-vs-threshold polylines per summary group.
std::string pck_curve_svg(const EvalReport& report, const std::string& title);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace hg
