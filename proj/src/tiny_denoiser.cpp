#include "assembloid/tiny_denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "assembloid/errors.hpp"

namespace assembloid {

namespace {

std::size_t layout(const TinyDenoiserConfig& c, std::size_t& w1, std::size_t& b1,
                   std::size_t& w2, std::size_t& b2, std::size_t& w3, std::size_t& b3) {
    const std::size_t in1 = 3 + static_cast<std::size_t>(c.step_embed);
    const std::size_t h1 = static_cast<std::size_t>(c.hidden1);
    const std::size_t h2 = static_cast<std::size_t>(c.hidden2);
    w1 = 0;
    b1 = w1 + h1 * in1;
    w2 = b1 + h1;
    b2 = w2 + h2 * 2 * h1;
    w3 = b2 + h2;
    b3 = w3 + 3 * h2;
    return b3 + 3;
}

void validate_config(const TinyDenoiserConfig& c) {
    if (c.hidden1 < 1 || c.hidden2 < 1) throw InvalidInput("TinyDenoiser: hidden sizes must be >= 1");
    if (c.step_embed < 2 || c.step_embed % 2 != 0)
        throw InvalidInput("TinyDenoiser: step_embed must be even and >= 2");
}

}  // namespace

TinyDenoiser::TinyDenoiser(TinyDenoiserConfig config, std::string label, int schedule_steps,
                           double sigma_max, Rng& rng)
    : config_(config), label_(std::move(label)), schedule_steps_(schedule_steps),
      sigma_max_(sigma_max) {
    validate_config(config_);
    weights_.resize(layout(config_, w1_, b1_, w2_, b2_, w3_, b3_));
    const std::size_t in1 = 3 + static_cast<std::size_t>(config_.step_embed);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in1));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(2 * config_.hidden1));
    const double s3 = 1.0 / std::sqrt(static_cast<double>(config_.hidden2));
    for (std::size_t i = w1_; i < b1_; ++i) weights_[i] = rng.uniform(-s1, s1);
    for (std::size_t i = b1_; i < w2_; ++i) weights_[i] = 0.0;
    for (std::size_t i = w2_; i < b2_; ++i) weights_[i] = rng.uniform(-s2, s2);
    for (std::size_t i = b2_; i < w3_; ++i) weights_[i] = 0.0;
    for (std::size_t i = w3_; i < b3_; ++i) weights_[i] = rng.uniform(-s3, s3);
    for (std::size_t i = b3_; i < weights_.size(); ++i) weights_[i] = 0.0;
}

TinyDenoiser::TinyDenoiser(TinyDenoiserConfig config, std::string label, int schedule_steps,
                           double sigma_max, std::vector<double> weights)
    : config_(config), label_(std::move(label)), schedule_steps_(schedule_steps),
      sigma_max_(sigma_max), weights_(std::move(weights)) {
    validate_config(config_);
    std::size_t w1, b1, w2, b2, w3, b3;
    const std::size_t expected = layout(config_, w1, b1, w2, b2, w3, b3);
    if (weights_.size() != expected)
        throw InvalidInput("TinyDenoiser: weight vector size does not match architecture");
    w1_ = w1; b1_ = b1; w2_ = w2; b2_ = b2; w3_ = w3; b3_ = b3;
}

std::vector<double> TinyDenoiser::step_embedding(int z) const {
    const int half = config_.step_embed / 2;
    std::vector<double> emb(static_cast<std::size_t>(config_.step_embed));
    for (int j = 0; j < half; ++j) {
        const double freq = std::pow(10000.0, -static_cast<double>(j) / static_cast<double>(half));
        emb[static_cast<std::size_t>(2 * j)] = std::sin(static_cast<double>(z) * freq);
        emb[static_cast<std::size_t>(2 * j + 1)] = std::cos(static_cast<double>(z) * freq);
    }
    return emb;
}

void TinyDenoiser::forward(const PointCloud& noisy, int z, std::vector<double>& h1,
                           std::vector<double>& ctx, std::vector<double>& h2,
                           PointCloud& out) const {
    const std::size_t n = noisy.size();
    const std::size_t H1 = static_cast<std::size_t>(config_.hidden1);
    const std::size_t H2 = static_cast<std::size_t>(config_.hidden2);
    const std::size_t E = static_cast<std::size_t>(config_.step_embed);
    const std::size_t in1 = 3 + E;
    const std::vector<double> emb = step_embedding(z);

    h1.assign(n * H1, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const Vec3& x = noisy.points[p];
        const double input[3] = {x.x, x.y, x.z};
        for (std::size_t u = 0; u < H1; ++u) {
            double acc = weights_[b1_ + u];
            const double* row = &weights_[w1_ + u * in1];
            acc += row[0] * input[0] + row[1] * input[1] + row[2] * input[2];
            for (std::size_t e = 0; e < E; ++e) acc += row[3 + e] * emb[e];
            h1[p * H1 + u] = std::tanh(acc);
        }
    }

    // Mean pool. Each dimension is summed in ascending value order so the
    // result does not depend on the order points arrived in.
    ctx.assign(H1, 0.0);
    std::vector<double> column(n);
    for (std::size_t u = 0; u < H1; ++u) {
        for (std::size_t p = 0; p < n; ++p) column[p] = h1[p * H1 + u];
        std::sort(column.begin(), column.end());
        double acc = 0.0;
        for (double v : column) acc += v;
        ctx[u] = acc / static_cast<double>(n);
    }

    h2.assign(n * H2, 0.0);
    out.points.assign(n, Vec3{});
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t u = 0; u < H2; ++u) {
            double acc = weights_[b2_ + u];
            const double* row = &weights_[w2_ + u * 2 * H1];
            for (std::size_t k = 0; k < H1; ++k) acc += row[k] * h1[p * H1 + k];
            for (std::size_t k = 0; k < H1; ++k) acc += row[H1 + k] * ctx[k];
            h2[p * H2 + u] = std::tanh(acc);
        }
        double o[3];
        for (std::size_t d = 0; d < 3; ++d) {
            double acc = weights_[b3_ + d];
            const double* row = &weights_[w3_ + d * H2];
            for (std::size_t k = 0; k < H2; ++k) acc += row[k] * h2[p * H2 + k];
            o[d] = acc;
        }
        out.points[p] = {o[0], o[1], o[2]};
    }
}

PointCloud TinyDenoiser::predict_noise(const PointCloud& noisy, const std::string& label,
                                       int z) const {
    if (noisy.empty()) throw InvalidInput("TinyDenoiser: empty cloud");
    if (!label_.empty() && !label.empty() && label != label_)
        throw InterfaceViolation("TinyDenoiser: trained for label '" + label_ + "', asked for '" +
                                 label + "'");
    if (z < 0) throw StepError("TinyDenoiser: negative step");
    std::vector<double> h1, ctx, h2;
    PointCloud out;
    forward(noisy, z, h1, ctx, h2, out);
    return out;
}

double tiny_loss(const TinyDenoiser& net, const PointCloud& noisy, const PointCloud& target_eps,
                 int z) {
    if (noisy.size() != target_eps.size())
        throw CorrespondenceError("tiny_loss: cloud and target sizes differ");
    if (noisy.empty()) throw InvalidInput("tiny_loss: empty cloud");
    std::vector<double> h1, ctx, h2;
    PointCloud out;
    net.forward(noisy, z, h1, ctx, h2, out);
    double ss = 0.0;
    for (std::size_t p = 0; p < out.size(); ++p)
        ss += squared_distance(out.points[p], target_eps.points[p]);
    return ss / (3.0 * static_cast<double>(out.size()));
}

double tiny_loss_and_gradient(const TinyDenoiser& net, const PointCloud& noisy,
                              const PointCloud& target_eps, int z, std::vector<double>& grad) {
    if (noisy.size() != target_eps.size())
        throw CorrespondenceError("tiny_loss_and_gradient: cloud and target sizes differ");
    if (noisy.empty()) throw InvalidInput("tiny_loss_and_gradient: empty cloud");

    const std::size_t n = noisy.size();
    const std::size_t H1 = static_cast<std::size_t>(net.config_.hidden1);
    const std::size_t H2 = static_cast<std::size_t>(net.config_.hidden2);
    const std::size_t E = static_cast<std::size_t>(net.config_.step_embed);
    const std::size_t in1 = 3 + E;
    const std::vector<double> emb = net.step_embedding(z);

    std::vector<double> h1, ctx, h2;
    PointCloud out;
    net.forward(noisy, z, h1, ctx, h2, out);

    grad.assign(net.weights_.size(), 0.0);

    double loss = 0.0;
    const double scale = 1.0 / (3.0 * static_cast<double>(n));

    // delta2 for all points first; the context gradient needs their sum.
    std::vector<double> delta2(n * H2);
    std::vector<double> dctx(H1, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const Vec3 diff = out.points[p] - target_eps.points[p];
        loss += squared_distance(out.points[p], target_eps.points[p]);
        const double dout[3] = {2.0 * scale * diff.x, 2.0 * scale * diff.y, 2.0 * scale * diff.z};
        for (std::size_t d = 0; d < 3; ++d) {
            grad[net.b3_ + d] += dout[d];
            double* grow = &grad[net.w3_ + d * H2];
            for (std::size_t k = 0; k < H2; ++k) grow[k] += dout[d] * h2[p * H2 + k];
        }
        for (std::size_t u = 0; u < H2; ++u) {
            double dh2 = 0.0;
            for (std::size_t d = 0; d < 3; ++d)
                dh2 += dout[d] * net.weights_[net.w3_ + d * H2 + u];
            const double t = h2[p * H2 + u];
            const double d2 = dh2 * (1.0 - t * t);
            delta2[p * H2 + u] = d2;
            grad[net.b2_ + u] += d2;
            double* grow = &grad[net.w2_ + u * 2 * H1];
            for (std::size_t k = 0; k < H1; ++k) grow[k] += d2 * h1[p * H1 + k];
            for (std::size_t k = 0; k < H1; ++k) grow[H1 + k] += d2 * ctx[k];
            for (std::size_t k = 0; k < H1; ++k)
                dctx[k] += d2 * net.weights_[net.w2_ + u * 2 * H1 + H1 + k];
        }
    }
    loss *= scale;

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t p = 0; p < n; ++p) {
        const Vec3& x = noisy.points[p];
        const double input[3] = {x.x, x.y, x.z};
        for (std::size_t u = 0; u < H1; ++u) {
            // direct path through W2's first block plus the pooled path
            double dh1 = dctx[u] * inv_n;
            for (std::size_t v = 0; v < H2; ++v)
                dh1 += delta2[p * H2 + v] * net.weights_[net.w2_ + v * 2 * H1 + u];
            const double t = h1[p * H1 + u];
            const double d1 = dh1 * (1.0 - t * t);
            grad[net.b1_ + u] += d1;
            double* grow = &grad[net.w1_ + u * in1];
            grow[0] += d1 * input[0];
            grow[1] += d1 * input[1];
            grow[2] += d1 * input[2];
            for (std::size_t e = 0; e < E; ++e) grow[3 + e] += d1 * emb[e];
        }
    }
    return loss;
}

TrainingResult train_tiny_denoiser(const std::vector<Scene>& dataset,
                                   const NoiseSchedule& schedule, const TinyDenoiserConfig& arch,
                                   const TrainingConfig& training, Rng& rng) {
    if (dataset.empty()) throw InvalidInput("train_tiny_denoiser: empty dataset");
    if (training.steps < 1) throw InvalidInput("train_tiny_denoiser: steps must be >= 1");
    if (!(training.learning_rate > 0.0))
        throw InvalidInput("train_tiny_denoiser: learning rate must be positive");
    check_step(schedule, schedule.steps);

    // Rendered ground truth is fixed, so render once.
    std::vector<PointCloud> rendered;
    rendered.reserve(dataset.size());
    for (const Scene& s : dataset) {
        if (s.parts.empty()) throw InvalidInput("train_tiny_denoiser: scene with no parts");
        rendered.push_back(render_scene(s));
    }

    const double sigma_max = schedule.sigma[static_cast<std::size_t>(schedule.steps)];
    TrainingResult result{
        TinyDenoiser(arch, dataset.front().label, schedule.steps, sigma_max, rng), {}, false};
    TinyDenoiser& net = result.denoiser;

    std::vector<double> grad, velocity(net.parameter_count(), 0.0);
    std::vector<double> last_finite = net.weights();
    result.loss_curve.reserve(static_cast<std::size_t>(training.steps));

    for (int step = 0; step < training.steps; ++step) {
        const std::size_t si = rng.uniform_index(rendered.size());
        const int z = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(schedule.steps)));
        const NoisedCloud sample = forward_noise(rendered[si], schedule, z, rng);
        const double loss = tiny_loss_and_gradient(net, sample.noisy, sample.eps, z, grad);
        if (!std::isfinite(loss)) {
            net.weights() = last_finite;
            result.diverged = true;
            break;
        }
        result.loss_curve.push_back(loss);
        last_finite = net.weights();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            velocity[i] = training.momentum * velocity[i] - training.learning_rate * grad[i];
            net.weights()[i] += velocity[i];
        }
    }
    return result;
}

void save_checkpoint(const std::string& path, const TinyDenoiser& net) {
    nlohmann::json header;
    header["hidden1"] = net.config().hidden1;
    header["hidden2"] = net.config().hidden2;
    header["step_embed"] = net.config().step_embed;
    header["label"] = net.label();
    header["schedule_steps"] = net.schedule_steps();
    header["sigma_max"] = net.sigma_max();
    header["weight_count"] = net.parameter_count();
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);
    const char magic[8] = {'A', 'S', 'B', 'D', 'N', 'E', 'T', '\0'};
    out.write(magic, 8);
    const std::uint32_t version = 1;
    const std::uint32_t header_len = static_cast<std::uint32_t>(header_text.size());
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&header_len), 4);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    std::vector<float> blob(net.parameter_count());
    for (std::size_t i = 0; i < blob.size(); ++i)
        blob[i] = static_cast<float>(net.weights()[i]);
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

TinyDenoiser load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    const char expected[8] = {'A', 'S', 'B', 'D', 'N', 'E', 'T', '\0'};
    if (!in || std::memcmp(magic, expected, 8) != 0)
        throw IoError("load_checkpoint: bad magic in " + path);
    std::uint32_t version = 0, header_len = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&header_len), 4);
    if (!in || version != 1) throw IoError("load_checkpoint: unsupported version in " + path);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), header_len);
    if (!in) throw IoError("load_checkpoint: truncated header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_checkpoint: invalid header JSON: " + std::string(e.what()));
    }
    TinyDenoiserConfig config;
    std::string label;
    int schedule_steps = 0;
    double sigma_max = 0.0;
    std::size_t weight_count = 0;
    try {
        config.hidden1 = header.at("hidden1").get<int>();
        config.hidden2 = header.at("hidden2").get<int>();
        config.step_embed = header.at("step_embed").get<int>();
        label = header.at("label").get<std::string>();
        schedule_steps = header.at("schedule_steps").get<int>();
        sigma_max = header.at("sigma_max").get<double>();
        weight_count = header.at("weight_count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_checkpoint: missing header field: " + std::string(e.what()));
    }

    std::vector<float> blob(weight_count);
    in.read(reinterpret_cast<char*>(blob.data()),
            static_cast<std::streamsize>(weight_count * sizeof(float)));
    if (!in) throw IoError("load_checkpoint: truncated weight blob in " + path);
    std::vector<double> weights(weight_count);
    for (std::size_t i = 0; i < weight_count; ++i) weights[i] = static_cast<double>(blob[i]);
    return TinyDenoiser(config, label, schedule_steps, sigma_max, std::move(weights));
}

}  // namespace assembloid
