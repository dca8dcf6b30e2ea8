#include "zoneforge/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "zoneforge/util/parallel.hpp"

namespace zoneforge::train {

using nlohmann::json;

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
    if (decay < 0.0) throw ConfigError("decay must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    for (double w : zone_weights)
        if (w < 0.0) throw ConfigError("zone_weights must be >= 0");
}

void Regime::validate() const {
    if (kind == Kind::IM && !combo.has_value())
        throw ConfigError("IM regime needs an input combination");
}

NormStats compute_norm_stats(std::span<const CaseRecord> cases,
                             const std::vector<MapKind>& kinds) {
    if (cases.empty()) throw DataError("cannot compute normalization stats from zero cases");
    NormStats stats;
    stats.n_cases = static_cast<int>(cases.size());
    for (MapKind kind : kinds) {
        const int ki = static_cast<int>(kind);
        double sum = 0.0, sum2 = 0.0;
        std::size_t n = 0;
        for (const CaseRecord& rec : cases) {
            const VolumeGrid& v = rec.map(kind); // throws DataError when absent
            for (double x : v.values) {
                sum += x;
                sum2 += x * x;
            }
            n += v.size();
        }
        const double mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
        stats.mean[ki] = mean;
        stats.sd[ki] = std::max(std::sqrt(var), 1e-12);
        stats.present[ki] = true;
    }
    return stats;
}

namespace {

void check_uniform_grids(std::span<const CaseRecord> cases, const std::vector<MapKind>& kinds) {
    const Dims ref = cases.front().truth.dims;
    for (const CaseRecord& rec : cases) {
        if (!rec.coregistered())
            throw DataError("case " + rec.case_id + " maps are not co-registered");
        if (rec.truth.dims[0] != ref[0] || rec.truth.dims[1] != ref[1])
            throw DataError("case " + rec.case_id + " in-plane dims differ from the first case");
        for (MapKind k : kinds) rec.map(k); // throws DataError naming the gap
    }
}

} // namespace

std::vector<TrainSample> assemble_im(std::span<const CaseRecord> cases, InputCombo combo) {
    if (cases.empty()) throw DataError("assemble_im: no cases");
    check_uniform_grids(cases, combo.kinds());
    std::vector<TrainSample> out;
    for (const CaseRecord& rec : cases)
        for (int z = 0; z < rec.truth.dims[2]; ++z) out.push_back({&rec, z, combo});
    return out;
}

std::vector<TrainSample> assemble_um(std::span<const CaseRecord> cases) {
    if (cases.empty()) throw DataError("assemble_um: no cases");
    std::vector<MapKind> all(kAllMapKinds.begin(), kAllMapKinds.end());
    check_uniform_grids(cases, all);
    std::vector<TrainSample> out;
    for (const CaseRecord& rec : cases)
        for (int z = 0; z < rec.truth.dims[2]; ++z)
            for (const InputCombo& combo : InputCombo::canonical_list())
                out.push_back({&rec, z, combo});
    return out;
}

Tensor4<float> materialize_input(const TrainSample& s, const NormStats& norm, bool unified) {
    const Dims dims = s.rec->truth.dims;
    const int w = dims[0], h = dims[1];
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    const std::vector<MapKind> kinds = s.combo.kinds();
    const int channels = unified ? kMapKindCount : static_cast<int>(kinds.size());
    Tensor4<float> x(1, channels, h, w);
    for (std::size_t ci = 0; ci < kinds.size(); ++ci) {
        const MapKind kind = kinds[ci];
        const int ki = static_cast<int>(kind);
        const int slot = unified ? ki : static_cast<int>(ci); // canonical slot order
        const VolumeGrid& vol = s.rec->map(kind);
        const double mean = norm.present[ki] ? norm.mean[ki] : 0.0;
        const double sd = norm.present[ki] ? norm.sd[ki] : 1.0;
        const double* src = vol.values.data() + static_cast<std::size_t>(s.slice) * plane;
        float* dst = x.v.data() + static_cast<std::size_t>(slot) * plane;
        for (std::size_t i = 0; i < plane; ++i)
            dst[i] = static_cast<float>((src[i] - mean) / sd);
    }
    return x; // absent slots stay zero-filled
}

Tensor4<float> materialize_target(const TrainSample& s) {
    const Dims dims = s.rec->truth.dims;
    const int w = dims[0], h = dims[1];
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    Tensor4<float> t(1, 3, h, w);
    const std::size_t off = static_cast<std::size_t>(s.slice) * plane;
    for (int zi = 0; zi < 3; ++zi) {
        const std::uint8_t* src = s.rec->truth.zone(zi).data() + off;
        float* dst = t.v.data() + static_cast<std::size_t>(zi) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(src[i]);
    }
    return t;
}

template <typename T>
CeLoss<T> ce_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
    if (!pred.same_shape(target)) throw ShapeError("ce_loss: pred/target shape mismatch");
    constexpr double eps = 1e-7;
    const double n = static_cast<double>(pred.size());
    CeLoss<T> out;
    out.grad = Tensor4<T>(pred.n, pred.c, pred.h, pred.w);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        const double p = std::clamp(static_cast<double>(pred.v[i]), eps, 1.0 - eps);
        const double t = static_cast<double>(target.v[i]);
        acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
        out.grad.v[i] = static_cast<T>((p - t) / (p * (1.0 - p)) / n);
    }
    out.loss = acc / n;
    return out;
}

template CeLoss<float> ce_loss<float>(const Tensor4<float>&, const Tensor4<float>&);
template CeLoss<double> ce_loss<double>(const Tensor4<double>&, const Tensor4<double>&);

template <typename T>
double ce_loss_value(const Tensor4<T>& pred, const Tensor4<T>& target) {
    if (!pred.same_shape(target)) throw ShapeError("ce_loss: pred/target shape mismatch");
    constexpr double eps = 1e-7;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        const double p = std::clamp(static_cast<double>(pred.v[i]), eps, 1.0 - eps);
        const double t = static_cast<double>(target.v[i]);
        acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    return acc / static_cast<double>(pred.size());
}

template double ce_loss_value<float>(const Tensor4<float>&, const Tensor4<float>&);
template double ce_loss_value<double>(const Tensor4<double>&, const Tensor4<double>&);

void sgd_step(std::span<float> weights, std::span<const float> grads,
              std::span<float> velocity, const OptimizerConfig& cfg, std::uint64_t t) {
    if (weights.size() != grads.size() || weights.size() != velocity.size())
        throw ShapeError("sgd_step: weight/grad/velocity lengths differ");
    const bool weight_decay = cfg.decay_mode == OptimizerConfig::DecayMode::Weight;
    const float eta = static_cast<float>(
        weight_decay ? cfg.learning_rate
                     : cfg.learning_rate / (1.0 + cfg.decay * static_cast<double>(t)));
    const float mu = static_cast<float>(cfg.momentum);
    const float wd = weight_decay ? static_cast<float>(cfg.decay) : 0.0f;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        velocity[i] = mu * velocity[i] + grads[i] + wd * weights[i];
        weights[i] -= eta * velocity[i];
    }
}

void write_trainlog(const TrainLog& log, const std::filesystem::path& path,
                    bool zero_wall_time) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "epoch,mean_loss,wall_time_s\n";
    char buf[128];
    for (const auto& row : log.rows) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.3f\n", row.epoch, row.mean_loss,
                      zero_wall_time ? 0.0 : row.wall_time_s);
        out << buf;
    }
}

FitResult fit(const Regime& regime, std::span<const CaseRecord> cases, const ArchConfig& arch,
              const OptimizerConfig& opt, Rng rng, int threads, const EpochCallback& on_epoch) {
    regime.validate();
    opt.validate();
    if (arch.in_channels != regime.in_channels())
        throw ConfigError("arch.in_channels (" + std::to_string(arch.in_channels) +
                          ") does not match the regime's channel count (" +
                          std::to_string(regime.in_channels()) + ")");

    const bool unified = regime.kind == Regime::Kind::UM;
    std::vector<TrainSample> samples =
        unified ? assemble_um(cases) : assemble_im(cases, *regime.combo);
    if (samples.empty()) throw DataError("fit: assembled dataset is empty");

    const std::vector<MapKind> kinds =
        unified ? std::vector<MapKind>(kAllMapKinds.begin(), kAllMapKinds.end())
                : regime.combo->kinds();

    FitResult result;
    result.regime = regime;
    result.norm = compute_norm_stats(cases, kinds);
    result.params = unet::init_params(arch, rng.split(0));
    result.best_params = result.params;
    result.best_epoch = 0;

    const unet::DenseUnet<float> engine(arch);
    const std::size_t pcount = engine.layout().param_count;
    std::vector<float> velocity(pcount, 0.0f);
    std::vector<float> batch_grad(pcount, 0.0f);

    const int bsz = opt.batch_size;
    std::vector<std::vector<float>> sample_grads(bsz, std::vector<float>(pcount));
    std::vector<double> sample_loss(bsz);
    std::vector<unet::Cache<float>> caches(std::max(1, threads));

    Rng shuffle_rng = rng.split(1);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::uint64_t t = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    const auto t0 = std::chrono::steady_clock::now();

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        // seeded Fisher-Yates shuffle
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t off = 0; off < order.size(); off += bsz) {
            const std::size_t cur = std::min<std::size_t>(bsz, order.size() - off);
            parallel_for_workers(cur, threads, [&](std::size_t bi, std::size_t wi) {
                const TrainSample& s = samples[order[off + bi]];
                const Tensor4<float> x = materialize_input(s, result.norm, unified);
                const Tensor4<float> target = materialize_target(s);
                const Tensor4<float> pred =
                    engine.forward(result.params.flat, x, caches[wi]);
                CeLoss<float> ce = ce_loss(pred, target);
                sample_loss[bi] = ce.loss;
                if (opt.zone_weights != std::array<double, 3>{1.0, 1.0, 1.0}) {
                    const std::size_t plane = ce.grad.plane();
                    for (int zc = 0; zc < 3; ++zc) {
                        const float zw = static_cast<float>(opt.zone_weights[zc]);
                        float* g = ce.grad.v.data() + zc * plane;
                        for (std::size_t i = 0; i < plane; ++i) g[i] *= zw;
                    }
                }
                engine.backward(result.params.flat, caches[wi], ce.grad,
                                sample_grads[bi]);
            });
            // reduce in sample order: identical result for any worker count
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0f);
            for (std::size_t bi = 0; bi < cur; ++bi) {
                const float* g = sample_grads[bi].data();
                for (std::size_t j = 0; j < pcount; ++j) batch_grad[j] += g[j];
            }
            const float inv = 1.0f / static_cast<float>(cur);
            for (float& g : batch_grad) g *= inv;

            double batch_loss = 0.0;
            for (std::size_t bi = 0; bi < cur; ++bi) batch_loss += sample_loss[bi];
            if (!std::isfinite(batch_loss))
                throw TrainError("training diverged (non-finite loss) at step " +
                                 std::to_string(t));
            loss_sum += batch_loss;
            seen += cur;

            sgd_step(result.params.flat, batch_grad, velocity, opt, t);
            ++t;
        }

        const double mean_loss = loss_sum / static_cast<double>(seen);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.rows.push_back({epoch, mean_loss, wall});
        if (mean_loss < best_loss) {
            best_loss = mean_loss;
            result.best_params = result.params;
            result.best_epoch = epoch;
        }
        if (on_epoch && !on_epoch(epoch, mean_loss, result.params)) break;
    }
    result.steps = t;
    return result;
}

MaskSet predict(const NetworkParams<float>& params, const NormStats& norm,
                const CaseRecord& rec, const InputCombo& combo, bool unified, int threads) {
    if (params.arch.in_channels != (unified ? kMapKindCount : combo.channel_count()))
        throw DataError("checkpoint channel count does not match the requested combination");
    for (MapKind k : combo.kinds()) rec.map(k); // DataError if missing
    if (!rec.coregistered()) throw DataError("case " + rec.case_id + " is not co-registered");

    const Dims dims = rec.truth.dims;
    const int w = dims[0], h = dims[1], nz = dims[2];
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    const std::size_t n = rec.truth.size();
    std::vector<std::uint8_t> pg(n, 0), cz(n, 0), pz(n, 0);

    const unet::DenseUnet<float> engine(params.arch);
    const int workers = std::max(1, threads);
    std::vector<unet::Cache<float>> caches(workers);

    parallel_for_workers(static_cast<std::size_t>(nz), workers, [&](std::size_t zi, std::size_t wi) {
        TrainSample s{&rec, static_cast<int>(zi), combo};
        const Tensor4<float> x = materialize_input(s, norm, unified);
        const Tensor4<float> y = engine.forward(params.flat, x, caches[wi]);
        const std::size_t base = zi * plane;
        // strict > 0.5: an untrained net (sigmoid(0) = 0.5) predicts background
        for (std::size_t i = 0; i < plane; ++i) {
            const bool g = y.v[i] > 0.5f;
            const bool c = y.v[plane + i] > 0.5f;
            const bool p = y.v[2 * plane + i] > 0.5f;
            pg[base + i] = g;
            pz[base + i] = p && g;          // pz := pz & pg
            cz[base + i] = c && g && !pz[base + i]; // cz := cz & pg & !pz (PZ wins ties)
        }
    });
    return MaskSet(dims, rec.truth.spacing_mm, std::move(pg), std::move(cz), std::move(pz));
}

namespace {

json arch_to_json(const ArchConfig& a) {
    return {{"in_channels", a.in_channels},   {"n_stages", a.n_stages},
            {"convs_per_block", a.convs_per_block}, {"growth", a.growth},
            {"stem_channels", a.stem_channels}, {"compression", a.compression}};
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig a;
    a.in_channels = j.at("in_channels").get<int>();
    a.n_stages = j.at("n_stages").get<int>();
    a.convs_per_block = j.at("convs_per_block").get<int>();
    a.growth = j.at("growth").get<int>();
    a.stem_channels = j.at("stem_channels").get<int>();
    a.compression = j.at("compression").get<double>();
    a.validate();
    return a;
}

} // namespace

void save_checkpoint(const NetworkParams<float>& params, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    json norm = json::object();
    for (int k = 0; k < kMapKindCount; ++k)
        if (meta.norm.present[k])
            norm[to_string(static_cast<MapKind>(k))] = {meta.norm.mean[k], meta.norm.sd[k]};
    json header = {
        {"magic", "zoneforge.ckpt"},
        {"arch", arch_to_json(params.arch)},
        {"step", meta.step},
        {"rng",
         {{"seed", std::to_string(meta.rng_seed)},
          {"counter", std::to_string(meta.rng_counter)},
          {"state",
           {std::to_string(meta.rng_state[0]), std::to_string(meta.rng_state[1]),
            std::to_string(meta.rng_state[2]), std::to_string(meta.rng_state[3])}}}},
        {"regime", meta.regime.kind == Regime::Kind::UM ? "um" : "im"},
        {"combo", meta.regime.combo ? json(meta.regime.combo->name()) : json(nullptr)},
        {"norm", {{"kinds", norm}, {"n_cases", meta.norm.n_cases}, {"source", meta.norm.source}}},
        {"param_count", params.flat.size()},
        {"dtype", "f32le"}};
    out << header.dump() << '\n';
    std::vector<unsigned char> buf(params.flat.size() * 4);
    for (std::size_t i = 0; i < params.flat.size(); ++i) {
        std::uint32_t u;
        std::memcpy(&u, &params.flat[i], 4);
        buf[4 * i + 0] = static_cast<unsigned char>(u & 0xFF);
        buf[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xFF);
        buf[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xFF);
        buf[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("checkpoint: missing header");
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("magic", "") != "zoneforge.ckpt")
        throw FormatError("not a zoneforge checkpoint: " + path.string());

    Checkpoint ck;
    ck.params.arch = arch_from_json(header.at("arch"));
    ck.meta.step = header.at("step").get<std::uint64_t>();
    const auto& rj = header.at("rng");
    ck.meta.rng_seed = std::stoull(rj.at("seed").get<std::string>());
    ck.meta.rng_counter = std::stoull(rj.at("counter").get<std::string>());
    for (int i = 0; i < 4; ++i)
        ck.meta.rng_state[i] = std::stoull(rj.at("state")[i].get<std::string>());
    const std::string regime = header.at("regime").get<std::string>();
    if (regime == "um") {
        ck.meta.regime = Regime::um();
    } else {
        std::vector<std::string> names;
        std::string name = header.at("combo").get<std::string>(), tok;
        for (char c : name) {
            if (c == '+') {
                names.push_back(tok);
                tok.clear();
            } else
                tok += c;
        }
        names.push_back(tok);
        ck.meta.regime = Regime::im(InputCombo::parse(names));
    }
    const auto& nj = header.at("norm");
    ck.meta.norm.n_cases = nj.at("n_cases").get<int>();
    ck.meta.norm.source = nj.at("source").get<std::string>();
    for (const auto& [key, value] : nj.at("kinds").items()) {
        const int ki = static_cast<int>(map_kind_from_string(key));
        ck.meta.norm.present[ki] = true;
        ck.meta.norm.mean[ki] = value[0].get<double>();
        ck.meta.norm.sd[ki] = value[1].get<double>();
    }

    const std::size_t pcount = header.at("param_count").get<std::size_t>();
    if (pcount != unet::param_count(ck.params.arch))
        throw FormatError("checkpoint param_count does not match its architecture");
    std::vector<unsigned char> buf(pcount * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw FormatError("checkpoint payload shorter than param_count requires");
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError("checkpoint payload longer than param_count requires");
    ck.params.flat.resize(pcount);
    for (std::size_t i = 0; i < pcount; ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(buf[4 * i]) |
                                (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                                (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                                (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
        std::memcpy(&ck.params.flat[i], &u, 4);
    }
    return ck;
}

} // namespace zoneforge::train
