#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "hg/io.hpp"
#include "json.hpp"

namespace hg {

using ojson = nlohmann::ordered_json;

namespace {

constexpr char kMagic[5] = {'H', 'G', 'N', 'E', 'T'};

template <typename U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const std::string& in, std::size_t pos) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

void append_floats(std::string& out, const TensorF& t) {
    for (float f : t.data()) put_le(out, std::bit_cast<std::uint32_t>(f));
}

void read_floats(const std::string& in, std::size_t pos, TensorF& t) {
    auto d = t.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::bit_cast<float>(get_le<std::uint32_t>(in, pos + 4 * i));
}

struct NamedTensor {
    std::string name;
    TensorF tensor;
};

}  // namespace

void save_checkpoint(const fs::path& path, StackedModelParams<float>& model, const RmsPropState<float>* optimizer,
                     const TrainerState* trainer, const TrainConfig* train_config) {
    std::vector<NamedTensor> tensors;
    std::vector<std::string> param_names;
    model.for_each_tensor([&](const std::string& name, TensorF& t, TensorRole role) {
        tensors.push_back({name, t});
        if (role == TensorRole::parameter) param_names.push_back(name);
    });
    const std::size_t opt_count = optimizer ? optimizer->square_avg.size() : 0;
    if (opt_count && opt_count != param_names.size())
        throw std::invalid_argument("checkpoint: optimizer state does not match the parameter list");
    for (std::size_t i = 0; i < opt_count; ++i)
        tensors.push_back({"optimizer.square_avg." + param_names[i], optimizer->square_avg[i]});

    std::string payload;
    ojson list = ojson::array();
    for (const auto& nt : tensors) {
        list.push_back({{"name", nt.name}, {"shape", nt.tensor.shape()}, {"offset", payload.size()}});
        append_floats(payload, nt.tensor);
    }
    ojson bn_updates = ojson::object();
    model.for_each_batchnorm([&](const std::string& name, BatchNormParams<float>& bn) {
        bn_updates[name] = bn.stats.updates;
    });

    ojson header;
    header["model"] = ojson::parse(model_config_to_json(model.config));
    header["optimizer"] = {{"type", "rmsprop"}, {"square_avg_tensors", opt_count}};
    if (train_config) {
        header["optimizer"]["alpha"] = train_config->rmsprop_alpha;
        header["optimizer"]["epsilon"] = train_config->rmsprop_epsilon;
        header["train_config"] = ojson::parse(train_config_to_json(*train_config));
    }
    if (trainer) {
        header["iteration"] = trainer->iteration;
        header["rng_state"] = trainer->rng_state;
        header["trainer"] = {{"lr", trainer->lr},
                             {"best_accuracy", trainer->best_accuracy},
                             {"evals_since_best", trainer->evals_since_best},
                             {"lr_dropped", trainer->lr_dropped},
                             {"loss_sum", trainer->loss_sum},
                             {"loss_count", trainer->loss_count}};
    }
    header["batchnorm_updates"] = bn_updates;
    header["tensors"] = list;
    header["payload_bytes"] = payload.size();
    header["payload_crc32"] = crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));
    const std::string hjson = header.dump();

    std::string out(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, hjson.size());
    out += hjson;
    out += payload;

    // Write to a sibling file first so an interrupted save never clobbers a good checkpoint.
    const fs::path tmp = path.string() + ".tmp";
    write_text(tmp, out);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& path) {
    const std::string in = read_text(path);
    auto corrupt = [&](const std::string& why) -> IoError {
        return IoError("corrupt checkpoint " + path.string() + ": " + why);
    };
    const std::size_t prefix = sizeof kMagic + 4 + 8;
    if (in.size() < prefix || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) throw corrupt("bad magic");
    const auto version = get_le<std::uint32_t>(in, sizeof kMagic);
    if (version != kCheckpointVersion) throw corrupt("unsupported version " + std::to_string(version));
    const auto hlen = get_le<std::uint64_t>(in, sizeof kMagic + 4);
    if (hlen > in.size() - prefix) throw corrupt("header length exceeds file size");
    ojson header;
    try {
        header = ojson::parse(in.substr(prefix, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw corrupt(std::string("unreadable header: ") + e.what());
    }
    const std::string payload = in.substr(prefix + hlen);

    try {
        if (header.at("payload_bytes").get<std::size_t>() != payload.size())
            throw corrupt("payload is " + std::to_string(payload.size()) + " bytes, header says " +
                          header.at("payload_bytes").dump());
        const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));
        if (header.at("payload_crc32").get<unsigned long>() != crc) throw corrupt("payload checksum mismatch");

        Checkpoint ck;
        ck.model = init_params<float>(model_config_from_json(header.at("model").dump()), 0);
        std::map<std::string, std::pair<Shape, std::size_t>> index;
        for (const auto& t : header.at("tensors"))
            index[t.at("name").get<std::string>()] = {t.at("shape").get<Shape>(), t.at("offset").get<std::size_t>()};

        auto fill = [&](const std::string& name, TensorF& t) {
            auto it = index.find(name);
            if (it == index.end()) throw corrupt("missing tensor " + name);
            const auto& [shape, offset] = it->second;
            if (shape != t.shape())
                throw corrupt("tensor " + name + " has shape " + shape_string(shape) + ", expected " +
                              shape_string(t.shape()));
            if (offset + 4 * t.numel() > payload.size()) throw corrupt("tensor " + name + " runs past the payload");
            read_floats(payload, offset, t);
        };
        std::vector<std::string> param_names;
        ck.model.for_each_tensor([&](const std::string& name, TensorF& t, TensorRole role) {
            fill(name, t);
            if (role == TensorRole::parameter) param_names.push_back(name);
        });
        const auto& updates = header.at("batchnorm_updates");
        ck.model.for_each_batchnorm([&](const std::string& name, BatchNormParams<float>& bn) {
            if (!updates.contains(name)) throw corrupt("missing batch-norm counter " + name);
            bn.stats.updates = updates.at(name).get<std::int64_t>();
        });
        const auto opt_count = header.at("optimizer").at("square_avg_tensors").get<std::size_t>();
        if (opt_count && opt_count != param_names.size()) throw corrupt("optimizer state size mismatch");
        const auto params = ck.model.parameters();
        for (std::size_t i = 0; i < opt_count; ++i) {
            TensorF t(params[i].shape());
            fill("optimizer.square_avg." + param_names[i], t);
            ck.optimizer.square_avg.push_back(t);
        }
        if (header.contains("train_config"))
            ck.train_config = train_config_from_json(header.at("train_config").dump());
        if (header.contains("trainer")) {
            const auto& t = header.at("trainer");
            TrainerState s;
            s.iteration = header.at("iteration").get<long>();
            s.rng_state = header.at("rng_state").get<std::string>();
            s.lr = t.at("lr").get<double>();
            s.best_accuracy = t.at("best_accuracy").get<double>();
            s.evals_since_best = t.at("evals_since_best").get<int>();
            s.lr_dropped = t.at("lr_dropped").get<bool>();
            s.loss_sum = t.at("loss_sum").get<double>();
            s.loss_count = t.at("loss_count").get<long>();
            ck.trainer = s;
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw corrupt(std::string("malformed header: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw corrupt(e.what());
    }
}

}  // namespace hg
