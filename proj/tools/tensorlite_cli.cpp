#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tensorlite/demo.hpp"
#include "tensorlite/gradcheck_suite.hpp"

namespace {

using namespace tensorlite;
using Clock = std::chrono::steady_clock;

/// stdout unless a path was given.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw std::runtime_error("cannot open " + path + " for writing");
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

int cmd_gradcheck(const gradcheck::Options& opts, const std::string& only, std::uint64_t seed, const std::string& out) {
    Output o(out);
    const auto start = Clock::now();
    const auto report = gradcheck::run_suite(opts, only, {seed, seed + 1, seed + 2});
    const std::chrono::duration<double> elapsed = Clock::now() - start;
    o.stream() << report.str();
    std::fprintf(stderr, "gradcheck: %zu entries, rtol=%g atol=%g eps=%g, %.3f s\n", report.entries.size(), opts.rtol,
                 opts.atol, opts.eps, elapsed.count());
    if (!report.pass)
        for (const auto& e : report.entries)
            if (!e.pass) std::fprintf(stderr, "gradcheck: FAIL %s\n", e.name.c_str());
    return report.pass ? 0 : 1;
}

int cmd_demo(const demo::Config& cfg, const std::string& out) {
    Output o(out);
    const auto r = demo::run(cfg, &o.stream());
    if (r.diverged) std::fprintf(stderr, "demo %s: diverged: %s\n", cfg.task.c_str(), r.diagnostic.c_str());
    else if (!r.threshold_met) std::fprintf(stderr, "demo %s: threshold not met\n", cfg.task.c_str());
    return r.exit_code();
}

template <class Fn>
double seconds_per_call(Fn fn) {
    fn();
    int reps = 1;
    for (;;) {
        const auto start = Clock::now();
        for (int i = 0; i < reps; ++i) fn();
        const std::chrono::duration<double> t = Clock::now() - start;
        if (t.count() > 0.2 || reps >= 1 << 16) return t.count() / reps;
        reps *= 4;
    }
}

int cmd_bench(const std::string& out) {
    Output o(out);
    auto& s = o.stream();
    const int multi = num_threads();
    char line[160];
    // size is the element count of the output; matmul rows are n×n
    s << "# N = " << multi << " thread(s)\n";
    std::snprintf(line, sizeof line, "%-6s %10s %16s %16s %12s %12s\n", "op", "size", "elems/s(1)", "elems/s(N)",
                  "GFLOP/s(1)", "GFLOP/s(N)");
    s << line;
    struct Row {
        std::string op;
        std::int64_t size;
        double flops;
        std::function<void()> fn;
    };
    std::vector<Row> rows;
    for (std::int64_t n : {10'000LL, 1'000'000LL, 10'000'000LL}) {
        auto a = std::make_shared<Tensor>(Tensor::uniform(Shape{n}, -1, 1, 1));
        auto b = std::make_shared<Tensor>(Tensor::uniform(Shape{n}, -1, 1, 2));
        rows.push_back({"add", n, double(n), [a, b] { (void)kernels::map_binary(*a, *b, std::plus<float>{}); }});
        rows.push_back({"mul", n, double(n), [a, b] { (void)kernels::map_binary(*a, *b, std::multiplies<float>{}); }});
        rows.push_back({"sum", n, double(n), [a] { (void)kernels::reduce(kernels::ReduceOp::sum, *a, std::nullopt, false); }});
    }
    for (std::int64_t n : {64LL, 256LL, 512LL}) {
        auto x = std::make_shared<Tensor>(Tensor::uniform(Shape{n, n}, -1, 1, 3));
        auto w = std::make_shared<Tensor>(Tensor::uniform(Shape{n, n}, -1, 1, 4));
        rows.push_back({"matmul", n * n, 2.0 * double(n) * n * n, [x, w] { (void)kernels::matmul(*x, *w); }});
    }
    for (const auto& r : rows) {
        set_num_threads(1);
        const double t1 = seconds_per_call(r.fn);
        set_num_threads(multi);
        const double tn = seconds_per_call(r.fn);
        std::snprintf(line, sizeof line, "%-6s %10lld %16.4e %16.4e %12.3f %12.3f\n", r.op.c_str(),
                      static_cast<long long>(r.size), double(r.size) / t1, double(r.size) / tn, r.flops / t1 * 1e-9,
                      r.flops / tn * 1e-9);
        s << line << std::flush;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tensorlite: gradient checks, training demos and kernel benchmarks"};
    app.require_subcommand(1);

    gradcheck::Options gc;
    std::string only, out;
    std::uint64_t seed = 0;
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every primitive and layer");
    gradcheck_cmd->add_option("--only", only, "Run a single case")->check([](const std::string& name) {
        for (const auto& n : gradcheck::case_names())
            if (n == name) return std::string{};
        return "unknown case '" + name + "'";
    });
    gradcheck_cmd->add_option("--rtol", gc.rtol, "Relative tolerance")->capture_default_str();
    gradcheck_cmd->add_option("--atol", gc.atol, "Absolute tolerance")->capture_default_str();
    gradcheck_cmd->add_option("--eps", gc.eps, "Finite-difference step")->capture_default_str();
    gradcheck_cmd->add_option("--seed", seed, "First of three consecutive seeds")->capture_default_str();
    gradcheck_cmd->add_option("--out", out, "Write the report here instead of stdout");

    demo::Config cfg;
    std::int64_t epochs = -1;
    float lr = 0.0f;
    std::string optimizer;
    auto* demo_cmd = app.add_subcommand("demo", "Train a small model and log epoch,loss[,accuracy]");
    demo_cmd->add_option("task", cfg.task, "xor or blobs")->required()->check(CLI::IsMember({"xor", "blobs"}));
    demo_cmd->add_option("--seed", cfg.seed, "Data and initialization seed")->capture_default_str();
    auto* epochs_opt = demo_cmd->add_option("--epochs", epochs, "Training epochs (xor 5000, blobs 200)")
                           ->check(CLI::NonNegativeNumber);
    auto* lr_opt = demo_cmd->add_option("--lr", lr, "Learning rate (xor 0.5, blobs 0.01)")->check(CLI::PositiveNumber);
    auto* optimizer_opt = demo_cmd->add_option("--optimizer", optimizer, "sgd, adam or rmsprop (xor sgd, blobs adam)")
                              ->check(CLI::IsMember({"sgd", "adam", "rmsprop"}));
    demo_cmd->add_option("--out", out, "Write the log here instead of stdout");

    auto* bench_cmd = app.add_subcommand("bench", "Throughput of elementwise, reduction and matmul kernels");
    bench_cmd->add_option("--out", out, "Write the table here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gradcheck_cmd) return cmd_gradcheck(gc, only, seed, out);
        if (*demo_cmd) {
            if (*epochs_opt) cfg.epochs = epochs;
            if (*lr_opt) cfg.lr = lr;
            if (*optimizer_opt) cfg.optimizer = optimizer;
            return cmd_demo(cfg, out);
        }
        if (*bench_cmd) return cmd_bench(out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
