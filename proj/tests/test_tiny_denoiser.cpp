#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "assembloid/datagen.hpp"
#include "assembloid/errors.hpp"
#include "assembloid/tiny_denoiser.hpp"

using namespace assembloid;
namespace fs = std::filesystem;

namespace {

PointCloud random_cloud(Rng& rng, std::size_t n) {
    PointCloud cloud;
    for (std::size_t i = 0; i < n; ++i)
        cloud.points.push_back({rng.normal(), rng.normal(), rng.normal()});
    return cloud;
}

std::string temp_path(const char* name) {
    return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("analytic gradient matches central finite differences") {
    TinyDenoiserConfig arch;
    arch.hidden1 = 6;
    arch.hidden2 = 5;
    arch.step_embed = 4;
    Rng rng(81);
    TinyDenoiser net(arch, "probe", 50, 0.99, rng);

    const PointCloud noisy = random_cloud(rng, 5);
    const PointCloud target = random_cloud(rng, 5);
    const int z = 13;

    std::vector<double> grad;
    tiny_loss_and_gradient(net, noisy, target, z, grad);
    REQUIRE(grad.size() == net.parameter_count());

    // Every coordinate, central difference h = 1e-6.
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t k = 0; k < net.parameter_count(); ++k) {
        const double saved = net.weights()[k];
        net.weights()[k] = saved + h;
        const double up = tiny_loss(net, noisy, target, z);
        net.weights()[k] = saved - h;
        const double down = tiny_loss(net, noisy, target, z);
        net.weights()[k] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[k]), 1e-8});
        worst = std::max(worst, std::abs(fd - grad[k]) / denom);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("prediction is exactly permutation equivariant") {
    TinyDenoiserConfig arch;
    Rng rng(82);
    TinyDenoiser net(arch, "probe", 200, 0.99, rng);

    const PointCloud cloud = random_cloud(rng, 40);
    const PointCloud base = net.predict_noise(cloud, "probe", 7);

    std::vector<std::size_t> perm(cloud.size());
    std::iota(perm.begin(), perm.end(), 0u);
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.uniform_index(i)]);

    PointCloud shuffled;
    for (std::size_t i : perm) shuffled.points.push_back(cloud.points[i]);
    const PointCloud out = net.predict_noise(shuffled, "probe", 7);

    for (std::size_t i = 0; i < perm.size(); ++i) {
        CHECK(out.points[i].x == base.points[perm[i]].x);
        CHECK(out.points[i].y == base.points[perm[i]].y);
        CHECK(out.points[i].z == base.points[perm[i]].z);
    }
}

TEST_CASE("label and input validation") {
    TinyDenoiserConfig arch;
    Rng rng(83);
    const TinyDenoiser net(arch, "chair", 50, 0.99, rng);
    const PointCloud cloud = random_cloud(rng, 6);
    CHECK_THROWS_AS(net.predict_noise(cloud, "table", 3), InterfaceViolation);
    CHECK_NOTHROW(net.predict_noise(cloud, "", 3));  // unlabeled query is accepted
    CHECK_THROWS_AS(net.predict_noise(cloud, "chair", -1), StepError);
    CHECK_THROWS_AS(net.predict_noise(PointCloud{}, "chair", 3), InvalidInput);
}

TEST_CASE("training reduces the loss on a small dataset") {
    Rng gen_rng(84);
    std::vector<Scene> dataset;
    for (int i = 0; i < 2; ++i) {
        ShapeSpec spec;
        spec.family = ShapeFamily::chair;
        spec.points_per_part = 40;
        spec.seed = 100 + static_cast<std::uint64_t>(i);
        dataset.push_back(generate_scene(spec).scene);
    }
    const NoiseSchedule schedule = linear_schedule(50, 0.99);
    TinyDenoiserConfig arch;
    arch.hidden1 = 16;
    arch.hidden2 = 16;
    TrainingConfig training;
    training.steps = 400;
    Rng rng(85);
    const TrainingResult result = train_tiny_denoiser(dataset, schedule, arch, training, rng);
    REQUIRE(result.loss_curve.size() == 400);
    CHECK_FALSE(result.diverged);
    const double head = std::accumulate(result.loss_curve.begin(), result.loss_curve.begin() + 50,
                                        0.0) / 50.0;
    const double tail = std::accumulate(result.loss_curve.end() - 50, result.loss_curve.end(),
                                        0.0) / 50.0;
    CHECK(tail < head);
}

TEST_CASE("divergent training restores finite weights and reports it") {
    Rng gen_rng(86);
    ShapeSpec spec;
    spec.family = ShapeFamily::table;
    spec.points_per_part = 30;
    spec.seed = 5;
    const std::vector<Scene> dataset{generate_scene(spec).scene};
    const NoiseSchedule schedule = linear_schedule(50, 0.99);
    TinyDenoiserConfig arch;
    arch.hidden1 = 8;
    arch.hidden2 = 8;
    TrainingConfig training;
    training.steps = 200;
    training.learning_rate = 1e8;
    Rng rng(87);
    const TrainingResult result = train_tiny_denoiser(dataset, schedule, arch, training, rng);
    CHECK(result.diverged);
    for (double w : result.denoiser.weights()) CHECK(std::isfinite(w));
}

TEST_CASE("checkpoint round trip preserves predictions bit for bit") {
    TinyDenoiserConfig arch;
    arch.hidden1 = 12;
    arch.hidden2 = 10;
    Rng rng(88);
    TinyDenoiser net(arch, "chair", 120, 0.97, rng);
    // Float32 storage: quantize in-memory weights the same way the file does.
    for (double& w : net.weights()) w = static_cast<double>(static_cast<float>(w));

    const std::string path = temp_path("tiny_denoiser_roundtrip.ckpt");
    save_checkpoint(path, net);
    const TinyDenoiser loaded = load_checkpoint(path);

    CHECK(loaded.label() == "chair");
    CHECK(loaded.schedule_steps() == 120);
    CHECK(loaded.sigma_max() == doctest::Approx(0.97).epsilon(1e-7));
    CHECK(loaded.config().hidden1 == 12);
    CHECK(loaded.config().hidden2 == 10);
    REQUIRE(loaded.parameter_count() == net.parameter_count());

    const PointCloud cloud = random_cloud(rng, 20);
    const PointCloud a = net.predict_noise(cloud, "chair", 9);
    const PointCloud b = loaded.predict_noise(cloud, "chair", 9);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK(a.points[i].x == b.points[i].x);
        CHECK(a.points[i].y == b.points[i].y);
        CHECK(a.points[i].z == b.points[i].z);
    }
    fs::remove(path);
}

TEST_CASE("checkpoint loader rejects corrupt files") {
    const std::string path = temp_path("tiny_denoiser_corrupt.ckpt");

    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTMAGIC" << std::string(64, '\0');
    }
    CHECK_THROWS_AS(load_checkpoint(path), IoError);

    // Valid file truncated mid-blob.
    TinyDenoiserConfig arch;
    arch.hidden1 = 4;
    arch.hidden2 = 4;
    arch.step_embed = 2;
    Rng rng(89);
    TinyDenoiser net(arch, "", 10, 0.9, rng);
    save_checkpoint(path, net);
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 8);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);

    CHECK_THROWS_AS(load_checkpoint(temp_path("no_such_checkpoint.ckpt")), IoError);
    fs::remove(path);
}

TEST_CASE("architecture validation") {
    Rng rng(90);
    TinyDenoiserConfig odd;
    odd.step_embed = 3;
    CHECK_THROWS_AS(TinyDenoiser(odd, "", 10, 0.9, rng), InvalidInput);
    TinyDenoiserConfig tiny;
    tiny.hidden1 = 0;
    CHECK_THROWS_AS(TinyDenoiser(tiny, "", 10, 0.9, rng), InvalidInput);

    TinyDenoiserConfig ok;
    CHECK_THROWS_AS(TinyDenoiser(ok, "", 10, 0.9, std::vector<double>(3)), InvalidInput);
}
