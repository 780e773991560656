// Compares the serial and OpenMP batch-gradient paths on a synthetic
// workload and checks that both produce bitwise-identical results.

#include <chrono>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "edulstm/data.hpp"
#include "edulstm/model.hpp"
#include "edulstm/train_eval.hpp"

using namespace edulstm;
using clock_type = std::chrono::steady_clock;

namespace {

double time_run(const ModelConfig& cfg, const FusedLstmParams& params,
                const std::vector<EncodedSequence>& seqs,
                const std::vector<std::size_t>& batch, const Vector& weights, bool parallel,
                int reps, BatchGradient& out) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock_type::now();
        out = batch_gradients(cfg, params, seqs, batch, weights, 0.5, 1234, parallel);
        const auto t1 = clock_type::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

bool identical(const Gradients& a, const Gradients& b) {
    auto sa = param_spans(a);
    auto sb = param_spans(b);
    for (std::size_t i = 0; i < sa.size(); ++i)
        if (std::memcmp(sa[i].data(), sb[i].data(), sa[i].size() * sizeof(double)) != 0)
            return false;
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n_students = 256;
    std::size_t hidden = 64;
    int reps = 3;
    if (argc > 1 && std::string(argv[1]) == "--quick") {
        n_students = 32;
        hidden = 16;
        reps = 1;
    }

    SyntheticSpec spec;
    spec.n_students = n_students;
    spec.seq_len_min = 40;
    spec.seq_len_max = 60;
    spec.n_questions = 100;
    spec.fatigue = 0.2;
    spec.burst = 6;
    const auto data = gen_synthetic(spec, 7);
    const auto records = clean(data.records, 5);

    const EncodingConfig enc = EncodingConfig::fit(records, 32);
    ModelConfig cfg;
    cfg.hidden_dim = hidden;
    cfg.input_dim = enc.feature_dim();
    cfg.static_dim = enc.static_dim;
    cfg.tasks = {Task::NextCorrect, Task::Grade, Task::Engagement, Task::Risk};

    std::vector<EncodedSequence> seqs;
    for (const auto& rec : records) seqs.push_back(encode(rec, enc));
    std::vector<std::size_t> batch(seqs.size());
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;

    const FusedLstmParams params = init_params(cfg, 42);
    const Vector weights(cfg.tasks.size(), 1.0);

    BatchGradient serial_out;
    const double serial = time_run(cfg, params, seqs, batch, weights, false, reps, serial_out);
    std::cout << "sequences=" << seqs.size() << " hidden_dim=" << hidden << "\n";
    std::cout << "serial          " << serial * 1e3 << " ms\n";

#ifdef _OPENMP
    for (int threads : {1, 2, 4, 8}) {
        omp_set_num_threads(threads);
        BatchGradient par_out;
        const double t = time_run(cfg, params, seqs, batch, weights, true, reps, par_out);
        const bool same = identical(serial_out.grad, par_out.grad) &&
                          serial_out.mean_loss == par_out.mean_loss;
        std::cout << "openmp threads=" << threads << "  " << t * 1e3 << " ms  speedup="
                  << serial / t << "  bitwise_equal=" << (same ? "yes" : "NO") << "\n";
        if (!same) return 1;
    }
#else
    std::cout << "built without OpenMP; parallel path unavailable\n";
#endif
    return 0;
}
