#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pixdiff/grid.hpp"
#include "pixdiff/learner/train.hpp"

namespace pixdiff::learner {

// Checkpoint format: two text lines (magic and a JSON header describing the
// architecture and counters), then the parameter vectors and the optimizer
// moments as raw little-endian doubles, each preceded by a u64 length.
// Loading restores training state bit-for-bit.

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline constexpr const char* kModelMagic = "PIXDIFF-MODEL 1";

namespace detail {

// Artifact problems (missing/corrupt/mismatched files) are runtime failures,
// distinct from configuration rejection.
inline void io_check(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

// The payload is declared little-endian; refuse to write or read it on a
// big-endian host rather than silently emitting an incompatible file.
inline bool host_is_little_endian() {
    const std::uint16_t probe = 0x0102;
    return reinterpret_cast<const unsigned char*>(&probe)[0] == 0x02;
}

inline void check_byte_order() {
    io_check(host_is_little_endian(),
             "model files are little-endian; this host is big-endian");
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    io_check(bool(in), "model file truncated");
    return v;
}

inline void write_vec(std::ostream& out, const std::vector<double>& v) {
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> read_vec(std::istream& in) {
    std::vector<double> v(read_u64(in));
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    io_check(bool(in), "model file truncated");
    return v;
}

inline void save_params_and_opt(std::ostream& out, const std::vector<ParamRef>& prm,
                                const Adam& opt) {
    write_u64(out, prm.size());
    for (const ParamRef& p : prm) write_vec(out, *p.w);
    for (const std::vector<double>& m : opt.m) write_vec(out, m);
    for (const std::vector<double>& v : opt.v) write_vec(out, v);
}

inline void load_params_and_opt(std::istream& in, const std::vector<ParamRef>& prm, Adam& opt) {
    const std::uint64_t n = read_u64(in);
    io_check(n == prm.size(), "model file does not match the expected architecture");
    for (const ParamRef& p : prm) {
        std::vector<double> v = read_vec(in);
        io_check(v.size() == p.w->size(), "model file parameter size mismatch");
        *p.w = std::move(v);
    }
    opt.m.clear();
    opt.v.clear();
    for (std::uint64_t k = 0; k < n; ++k) opt.m.push_back(read_vec(in));
    for (std::uint64_t k = 0; k < n; ++k) opt.v.push_back(read_vec(in));
    for (std::uint64_t k = 0; k < n; ++k)
        io_check(opt.m[k].size() == prm[k].w->size() && opt.v[k].size() == prm[k].w->size(),
                "model file optimizer size mismatch");
}

inline nlohmann::json open_header(std::istream& in, const std::string& kind) {
    check_byte_order();
    std::string magic, header;
    std::getline(in, magic);
    io_check(magic == kModelMagic, "not a model file (bad magic)");
    std::getline(in, header);
    nlohmann::json meta = nlohmann::json::parse(header);
    io_check(meta.at("kind").get<std::string>() == kind,
            "model file holds a different network kind");
    io_check(meta.at("byte_order").get<std::string>() == "little",
             "model file declares an unsupported byte order");
    return meta;
}

inline nlohmann::json common_meta(const std::string& kind, const Shape& shape,
                                  const TrainConfig& cfg, const Adam& opt, int iteration) {
    check_byte_order();
    return nlohmann::json{{"kind", kind},
                          {"byte_order", "little"},
                          {"shape", {shape.width, shape.height, shape.channels}},
                          {"gamma", cfg.gamma},
                          {"total_steps", cfg.total_steps},
                          {"seed", cfg.seed},
                          {"adam",
                           {{"lr", opt.cfg.lr},
                            {"beta1", opt.cfg.beta1},
                            {"beta2", opt.cfg.beta2},
                            {"eps", opt.cfg.eps},
                            {"t", opt.t}}},
                          {"iteration", iteration}};
}

inline void apply_common_meta(const nlohmann::json& meta, TrainConfig& cfg, Adam& opt,
                              int& iteration, Shape& shape) {
    const auto& sh = meta.at("shape");
    shape = Shape{sh.at(0).get<int>(), sh.at(1).get<int>(), sh.at(2).get<int>()};
    cfg.gamma = meta.at("gamma").get<double>();
    cfg.total_steps = meta.at("total_steps").get<int>();
    cfg.seed = meta.at("seed").get<std::uint64_t>();
    const auto& ad = meta.at("adam");
    opt.cfg.lr = ad.at("lr").get<double>();
    opt.cfg.beta1 = ad.at("beta1").get<double>();
    opt.cfg.beta2 = ad.at("beta2").get<double>();
    opt.cfg.eps = ad.at("eps").get<double>();
    opt.t = ad.at("t").get<long>();
    iteration = meta.at("iteration").get<int>();
}

}  // namespace detail

inline void save_scale_trainer(const std::string& path, ScaleTrainer& tr) {
    std::ofstream out(path, std::ios::binary);
    detail::io_check(out.good(), "save_scale_trainer: cannot open " + path);
    nlohmann::json meta =
        detail::common_meta("scale_estimator", tr.net.shape, tr.cfg, tr.opt, tr.iteration);
    meta["emb_dim"] = tr.net.emb_dim;
    meta["enc_dim"] = tr.net.enc_dim;
    meta["bottleneck_dim"] = tr.net.bottleneck_dim;
    out << kModelMagic << '\n' << meta.dump() << '\n';
    detail::save_params_and_opt(out, params(tr.net), tr.opt);
    detail::io_check(out.good(), "save_scale_trainer: write failed for " + path);
}

// Restores a checkpoint; cfg fields not stored in the file (batch size,
// divergence guard, ...) come from the argument.
inline ScaleTrainer load_scale_trainer(const std::string& path, const TrainConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    detail::io_check(in.good(), "load_scale_trainer: cannot open " + path);
    const nlohmann::json meta = detail::open_header(in, "scale_estimator");
    ScaleTrainer tr;
    tr.cfg = cfg;
    Shape shape;
    detail::apply_common_meta(meta, tr.cfg, tr.opt, tr.iteration, shape);
    RngStream dummy(0, 0);
    tr.net = ScaleEstimator(shape, dummy, meta.at("emb_dim").get<int>(),
                            meta.at("enc_dim").get<int>(), meta.at("bottleneck_dim").get<int>());
    detail::load_params_and_opt(in, params(tr.net), tr.opt);
    return tr;
}

inline void save_predictor_trainer(const std::string& path, PredictorTrainer& tr) {
    std::ofstream out(path, std::ios::binary);
    detail::io_check(out.good(), "save_predictor_trainer: cannot open " + path);
    nlohmann::json meta =
        detail::common_meta("reverse_predictor", tr.net.shape, tr.cfg, tr.opt, tr.iteration);
    meta["emb_dim"] = tr.net.emb_dim;
    meta["hidden"] = tr.net.hidden;
    meta["head_hidden"] = tr.net.head_hidden;
    out << kModelMagic << '\n' << meta.dump() << '\n';
    detail::save_params_and_opt(out, params(tr.net), tr.opt);
    detail::io_check(out.good(), "save_predictor_trainer: write failed for " + path);
}

inline PredictorTrainer load_predictor_trainer(const std::string& path, const TrainConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    detail::io_check(in.good(), "load_predictor_trainer: cannot open " + path);
    const nlohmann::json meta = detail::open_header(in, "reverse_predictor");
    PredictorTrainer tr;
    tr.cfg = cfg;
    Shape shape;
    detail::apply_common_meta(meta, tr.cfg, tr.opt, tr.iteration, shape);
    RngStream dummy(0, 0);
    tr.net = ReversePredictor(shape, tr.cfg.total_steps, dummy, meta.at("emb_dim").get<int>(),
                              meta.at("hidden").get<int>(), meta.at("head_hidden").get<int>());
    detail::load_params_and_opt(in, params(tr.net), tr.opt);
    return tr;
}

}  // namespace pixdiff::learner
