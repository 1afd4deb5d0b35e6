#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lmkan/adam.hpp"
#include "lmkan/costs.hpp"
#include "lmkan/errors.hpp"
#include "lmkan/model.hpp"
#include "lmkan/rng.hpp"
#include "lmkan/schedule.hpp"

namespace lmkan {

// ---------------------------------------------------------------------------
// Teacher
// ---------------------------------------------------------------------------

/// Frozen random tanh MLP: depth hidden layers of hidden_dim, fan-in uniform
/// init, every weight matrix multiplied by weight_scale afterwards. The x3
/// rescale keeps activation magnitudes from decaying across depth.
struct TeacherSpec {
    int in_dim = 32;
    int out_dim = 1;
    int hidden_dim = 1024;
    int depth = 10;  // hidden layers
    double weight_scale = 3.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (in_dim < 1 || out_dim < 1 || hidden_dim < 1 || depth < 1)
            throw ConfigError("teacher: dimensions and depth must be positive");
        if (!(weight_scale >= 0.0))
            throw ConfigError("teacher.weight_scale must be a nonnegative number");
    }
};

inline Model make_teacher(const TeacherSpec& spec) {
    spec.validate();
    RandomStream rs(spec.seed, "teacher.init");
    Model teacher;
    int prev = spec.in_dim;
    for (int layer = 0; layer < spec.depth; ++layer) {
        MlpBlock b;
        b.lin = init_linear(prev, spec.hidden_dim, rs);
        b.act = Activation::tanh_;
        teacher.blocks.push_back(std::move(b));
        prev = spec.hidden_dim;
    }
    MlpBlock head;
    head.lin = init_linear(prev, spec.out_dim, rs);
    head.act = Activation::none;
    teacher.blocks.push_back(std::move(head));
    for (auto& block : teacher.blocks) {
        auto& m = std::get<MlpBlock>(block);
        for (std::size_t i = 0; i < m.lin.W.size(); ++i) m.lin.W.data()[i] *= spec.weight_scale;
    }
    return teacher;
}

/// Fill X with i.i.d. standard normals from the stream (advances it).
inline void sample_inputs(RandomStream& rs, Matrix& X) {
    for (std::size_t i = 0; i < X.size(); ++i) X.data()[i] = rs.normal();
}

// ---------------------------------------------------------------------------
// Students
// ---------------------------------------------------------------------------

struct StudentSpec {
    std::string type = "lmkan";  // "lmkan" or "mlp"
    int hidden_dim = 32;
    int n_hidden = 2;  // hidden layers; lmkan students use n_hidden + 1 lookup layers
    int G = 12;
    PrecondMode precond = PrecondMode::relu_first;  // scheme for lmkan students
    double init_scale = -1.0;                       // < 0: default (n_in/2)^(-1/2)
    bool input_bn = false;
    std::uint64_t seed = 0;

    void validate(int in_dim) const {
        if (type != "lmkan" && type != "mlp")
            throw ConfigError("student.type must be \"lmkan\" or \"mlp\"");
        if (hidden_dim < 1) throw ConfigError("student.hidden_dim must be positive");
        if (n_hidden < 1) throw ConfigError("student.n_hidden must be >= 1");
        if (type == "lmkan") {
            if (G < 3) throw ConfigError("student.G must be >= 3");
            if (in_dim % 2 != 0) throw ConfigError("student: lmkan input width must be even");
            if (hidden_dim % 2 != 0) throw ConfigError("student.hidden_dim must be even for lmkan");
        }
    }
};

/// Per-layer precondition mode under a scheme: relu_first skips the ReLU on
/// the first layer (raw inputs stay intact), relu_last skips it on the last.
inline PrecondMode layer_mode(PrecondMode scheme, int layer, int n_layers) {
    if (scheme == PrecondMode::relu_first && layer == 0) return PrecondMode::linear;
    if (scheme == PrecondMode::relu_last && layer == n_layers - 1) return PrecondMode::linear;
    return scheme;
}

inline Model build_student(const StudentSpec& spec, int in_dim, int out_dim) {
    spec.validate(in_dim);
    Model model;
    RandomStream rs(spec.seed, "student.init");
    if (spec.input_bn) model.blocks.push_back(BnBlock{BatchNorm::make(in_dim, false)});
    if (spec.type == "mlp") {
        int prev = in_dim;
        for (int i = 0; i < spec.n_hidden; ++i) {
            MlpBlock b;
            b.lin = init_linear(prev, spec.hidden_dim, rs);
            b.bn = BatchNorm::make(spec.hidden_dim, /*affine=*/true);
            b.act = Activation::relu;
            model.blocks.push_back(std::move(b));
            prev = spec.hidden_dim;
        }
        MlpBlock head;
        head.lin = init_linear(prev, out_dim, rs);
        head.act = Activation::none;
        model.blocks.push_back(std::move(head));
        return model;
    }
    const int n_layers = spec.n_hidden + 1;
    int prev = in_dim;
    for (int i = 0; i < n_layers; ++i) {
        const int next = i == n_layers - 1 ? out_dim : spec.hidden_dim;
        LmKanBlock b;
        b.pre.layer = init_layer(prev, next, spec.G, rs.next_u64(), spec.init_scale);
        b.pre.mode = spec.precond == PrecondMode::none ? PrecondMode::none
                                                       : layer_mode(spec.precond, i, n_layers);
        if (b.pre.mode != PrecondMode::none) b.pre.lin = init_linear(prev, next, rs);
        if (i != n_layers - 1) b.bn = BatchNorm::make(next, /*affine=*/false);
        model.blocks.push_back(std::move(b));
        prev = next;
    }
    return model;
}

inline void set_gamma(Model& model, double gamma) {
    for (auto& block : model.blocks)
        if (auto* k = std::get_if<LmKanBlock>(&block)) k->pre.layer.gamma = gamma;
}

// ---------------------------------------------------------------------------
// Distillation loop
// ---------------------------------------------------------------------------

struct HistoryRow {
    long step = 0;
    int phase = 1;
    double gamma = 0, lambda = 0, lr = 0;
    double pure_loss = 0, total_loss = 0;
};

struct History {
    std::vector<HistoryRow> rows;

    /// Exponential sliding average of the pure loss (reporting smoother).
    std::vector<double> ema_pure(double alpha = 0.01) const {
        std::vector<double> out;
        out.reserve(rows.size());
        double s = rows.empty() ? 0.0 : rows.front().pure_loss;
        for (const auto& r : rows) {
            s = (1.0 - alpha) * s + alpha * r.pure_loss;
            out.push_back(s);
        }
        return out;
    }
};

inline void write_history_csv(const History& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open history file for writing: " + path);
    out << "step,phase,gamma,lambda,lr,pure_loss,total_loss\n";
    out.precision(17);
    for (const auto& r : h.rows)
        out << r.step << ',' << r.phase << ',' << r.gamma << ',' << r.lambda << ',' << r.lr << ','
            << r.pure_loss << ',' << r.total_loss << '\n';
}

struct TrainResult {
    Model model;
    History history;
    double final_mse = 0.0;
};

/// MSE of the model against the teacher over a fresh deterministic stream,
/// batch norms in inference mode.
inline double evaluate_mse(const Model& model, const Model& teacher, long n_samples,
                           std::uint64_t seed, std::size_t workers = 0) {
    const int in_dim = teacher.in_dim();
    const int out_dim = teacher.out_dim();
    RandomStream rs(seed, "eval.data");
    const long batch = 1024;
    double acc = 0.0;
    long done = 0;
    while (done < n_samples) {
        const long n = std::min(batch, n_samples - done);
        Matrix X(n, in_dim);
        sample_inputs(rs, X);
        const Matrix T = model_infer(teacher, X, workers);
        const Matrix Y = model_infer(model, X, workers);
        for (std::size_t i = 0; i < Y.size(); ++i) {
            const double d = Y.data()[i] - T.data()[i];
            acc += d * d;
        }
        done += n;
    }
    return acc / (static_cast<double>(n_samples) * out_dim);
}

struct TrainOptions {
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long eval_samples = 65536;
    std::size_t workers = 0;
    long log_every = 1;  // history granularity; losses are computed every step anyway
};

/// Run the four-phase distillation. The same entry point trains the MLP
/// baseline (gamma and lambda are then inert). Aborts with NumericError the
/// moment the loss stops being finite.
inline TrainResult train_distill(Model student, const Model& teacher, const PhaseConfig& cfg,
                                 const TrainOptions& opt = {}) {
    cfg.validate();
    const int in_dim = teacher.in_dim();
    const int out_dim = teacher.out_dim();
    if (student.in_dim() != in_dim || student.out_dim() != out_dim)
        throw ConfigError("train_distill: student and teacher dimensions do not chain");

    ModelGrads grads = make_grads(student);
    AdamState adam = make_adam(student, grads, cfg.lr, opt.beta1, opt.beta2, opt.adam_eps);
    RandomStream data(cfg.seed, "train.data");

    TrainResult result;
    result.history.rows.reserve(cfg.total_steps());
    Matrix X(cfg.batch_size, in_dim);

    for (long step = 0; step < cfg.total_steps(); ++step) {
        const ScheduleState sched = phase_schedule(step, cfg);
        set_gamma(student, sched.gamma);
        adam.lr = sched.lr;

        sample_inputs(data, X);
        const Matrix target = model_infer(teacher, X, opt.workers);

        Tape tape;
        Matrix Y = model_forward(student, X, /*training=*/true, &tape, opt.workers);

        const double inv_n = 1.0 / (static_cast<double>(X.rows()) * out_dim);
        double pure = 0.0;
        Matrix dY(Y.rows(), Y.cols());
        for (std::size_t i = 0; i < Y.size(); ++i) {
            const double d = Y.data()[i] - target.data()[i];
            pure += d * d * inv_n;
            dY.data()[i] = 2.0 * d * inv_n;
        }
        const double penalty_sum = model_penalty_sum(student);
        const double total = pure + sched.lambda * penalty_sum;
        if (!std::isfinite(total))
            throw NumericError("train_distill: loss is not finite at phase " +
                               std::to_string(sched.phase) + ", step " + std::to_string(step));

        zero_grads(grads);
        model_backward(student, tape, dY, grads, nullptr, opt.workers);
        add_model_penalty_grad(student, grads, sched.lambda);
        adam_step(adam, student, grads);

        if (step % opt.log_every == 0 || step + 1 == cfg.total_steps())
            result.history.rows.push_back(
                {step, sched.phase, sched.gamma, sched.lambda, sched.lr, pure, total});
    }

    result.final_mse = evaluate_mse(student, teacher, opt.eval_samples,
                                    cfg.seed ^ 0x5eedba5eull, opt.workers);
    result.model = std::move(student);
    return result;
}

// ---------------------------------------------------------------------------
// Grid-resolution sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    int G = 0;
    double final_mse = 0.0;
    bool ok = false;
    std::string error;
};

/// Train one student per G at a fixed budget. Failing rows carry the error
/// text; the sweep continues.
inline std::vector<SweepRow> sweep_grid_resolution(const StudentSpec& base, const Model& teacher,
                                                   const PhaseConfig& cfg,
                                                   const std::vector<int>& gs,
                                                   const TrainOptions& opt = {}) {
    std::vector<SweepRow> rows;
    rows.reserve(gs.size());
    for (int g : gs) {
        SweepRow row;
        row.G = g;
        try {
            StudentSpec spec = base;
            spec.G = g;
            Model student = build_student(spec, teacher.in_dim(), teacher.out_dim());
            TrainResult res = train_distill(std::move(student), teacher, cfg, opt);
            row.final_mse = res.final_mse;
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
            row.final_mse = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace lmkan
