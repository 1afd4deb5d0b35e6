#include <catch_amalgamated.hpp>

#include <cmath>

#include "lmkan/adam.hpp"
#include "lmkan/schedule.hpp"
#include "lmkan/train.hpp"

using namespace lmkan;

TEST_CASE("random streams are reproducible and split independently") {
    RandomStream a(123, "data");
    RandomStream b(123, "data");
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    RandomStream data(123, "data");
    RandomStream init(123, "init");
    bool all_equal = true;
    for (int i = 0; i < 64; ++i) all_equal &= data.next_u64() == init.next_u64();
    CHECK_FALSE(all_equal);

    // split depends on the parent chain
    RandomStream c1 = RandomStream(5, "a").split("x");
    RandomStream c2 = RandomStream(5, "b").split("x");
    CHECK(c1.next_u64() != c2.next_u64());
}

TEST_CASE("normal sampler has the right moments") {
    RandomStream rs(7, "moments");
    const long n = 1000000;
    double mean = 0.0, sq = 0.0;
    for (long i = 0; i < n; ++i) {
        const double x = rs.normal();
        mean += x;
        sq += x * x;
    }
    mean /= n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.005);
    CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("sample_inputs is deterministic per stream") {
    RandomStream s1(9, "train.data");
    RandomStream s2(9, "train.data");
    Matrix a(16, 4), b(16, 4);
    sample_inputs(s1, a);
    sample_inputs(s2, b);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.data()[i] == b.data()[i]);
}

TEST_CASE("adam: zero gradients freeze parameters, unit gradient moves by lr") {
    StudentSpec spec;
    spec.type = "mlp";
    spec.hidden_dim = 4;
    spec.seed = 3;
    Model m = build_student(spec, 4, 2);
    ModelGrads g = make_grads(m);
    AdamState adam = make_adam(m, g, 1e-3);

    std::vector<double> before;
    for_each_param(m, g, [&](const ParamRef& p) {
        before.insert(before.end(), p.value, p.value + p.size);
    });
    zero_grads(g);
    adam_step(adam, m, g);
    std::size_t idx = 0;
    for_each_param(m, g, [&](const ParamRef& p) {
        for (std::size_t i = 0; i < p.size; ++i) REQUIRE(p.value[i] == before[idx++]);
    });

    // single scalar with g = 1: first bias-corrected step is ~ -lr
    Model scalar;
    MlpBlock blk;
    blk.lin.n_in = 1;
    blk.lin.n_out = 1;
    blk.lin.W = Matrix(1, 1);
    blk.lin.W(0, 0) = 0.5;
    blk.lin.b.assign(1, 0.0);
    scalar.blocks.push_back(std::move(blk));
    ModelGrads gs = make_grads(scalar);
    AdamState a2 = make_adam(scalar, gs, 1e-3);
    gs.blocks[0].dW(0, 0) = 1.0;
    adam_step(a2, scalar, gs);
    const double moved = 0.5 - std::get<MlpBlock>(scalar.blocks[0]).lin.W(0, 0);
    CHECK(moved == Catch::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("phase schedule follows the four-phase contract") {
    PhaseConfig cfg;
    cfg.phase1_steps = 100;
    cfg.phase2_steps = 200;  // ramp defaults to 100
    cfg.phase3_steps = 300;
    cfg.phase4_steps = 400;
    cfg.gamma_target = 0.3;
    cfg.lambda_init = 10.0;
    cfg.lambda_target = 1e-4;
    cfg.lr = 2e-3;
    cfg.lr_terminal_steps = 100;
    cfg.lr_terminal_factor = 0.01;
    cfg.validate();

    const ScheduleState s0 = phase_schedule(0, cfg);
    CHECK(s0.phase == 1);
    CHECK(s0.gamma == 0.0);
    CHECK(s0.lambda == 10.0);
    CHECK(s0.lr == 2e-3);

    // midpoint of the gamma ramp
    const ScheduleState mid = phase_schedule(100 + 50, cfg);
    CHECK(mid.phase == 2);
    CHECK(mid.gamma == Catch::Approx(0.15));

    // post-ramp phase II holds gamma at the target
    CHECK(phase_schedule(100 + 150, cfg).gamma == 0.3);

    // phase III decays lambda geometrically down to the target
    const ScheduleState p3a = phase_schedule(300, cfg);
    const ScheduleState p3b = phase_schedule(599, cfg);
    CHECK(p3a.phase == 3);
    CHECK(p3a.lambda < 10.0);
    CHECK(p3b.lambda == Catch::Approx(1e-4).epsilon(1e-9));

    // phase IV before the terminal window: flat
    const ScheduleState p4 = phase_schedule(700, cfg);
    CHECK(p4.phase == 4);
    CHECK(p4.gamma == 0.3);
    CHECK(p4.lambda == 1e-4);
    CHECK(p4.lr == 2e-3);
    // last step reaches lr * factor
    CHECK(phase_schedule(999, cfg).lr == Catch::Approx(2e-5).epsilon(1e-9));

    // monotonicity across the whole run
    double prev_gamma = -1.0, prev_lambda = 1e300;
    for (long t = 0; t < cfg.total_steps(); ++t) {
        const ScheduleState s = phase_schedule(t, cfg);
        CHECK(s.gamma >= prev_gamma);
        CHECK(s.lambda <= prev_lambda);
        prev_gamma = s.gamma;
        prev_lambda = s.lambda;
    }
}

TEST_CASE("teacher: determinism, zero scale, activation magnitude probe") {
    TeacherSpec spec;
    spec.in_dim = 8;
    spec.out_dim = 1;
    spec.hidden_dim = 64;
    spec.depth = 3;
    spec.weight_scale = 3.0;
    spec.seed = 11;

    const Model t1 = make_teacher(spec);
    const Model t2 = make_teacher(spec);
    RandomStream rs(5, "teacher.probe");
    Matrix X(256, 8);
    sample_inputs(rs, X);
    const Matrix y1 = model_infer(t1, X);
    const Matrix y2 = model_infer(t2, X);
    for (std::size_t i = 0; i < y1.size(); ++i) REQUIRE(y1.data()[i] == y2.data()[i]);

    TeacherSpec zero = spec;
    zero.weight_scale = 0.0;
    const Model tz = make_teacher(zero);
    const Matrix yz = model_infer(tz, X);
    for (std::size_t r = 1; r < yz.rows(); ++r) CHECK(yz(r, 0) == yz(0, 0));

    // per-layer activation std must not decay toward zero with the x3 rescale
    Matrix probe(4096, 8);
    RandomStream rp(6, "teacher.probe2");
    sample_inputs(rp, probe);
    Model teacher = make_teacher(spec);
    Matrix cur = probe;
    std::vector<double> stds;
    for (std::size_t b = 0; b + 1 < teacher.blocks.size(); ++b) {
        Model partial;
        partial.blocks.push_back(teacher.blocks[b]);
        cur = model_infer(partial, cur);
        double sq = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i) sq += cur.data()[i] * cur.data()[i];
        stds.push_back(std::sqrt(sq / cur.size()));
    }
    for (double s : stds) CHECK(s > 0.3);
    CHECK(stds.back() > 0.5 * stds.front());

    // without the rescale the magnitudes do decay layer over layer
    TeacherSpec plain = spec;
    plain.weight_scale = 1.0;
    Model weak = make_teacher(plain);
    cur = probe;
    std::vector<double> weak_stds;
    for (std::size_t b = 0; b + 1 < weak.blocks.size(); ++b) {
        Model partial;
        partial.blocks.push_back(weak.blocks[b]);
        cur = model_infer(partial, cur);
        double sq = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i) sq += cur.data()[i] * cur.data()[i];
        weak_stds.push_back(std::sqrt(sq / cur.size()));
    }
    CHECK(weak_stds.back() < 0.5 * weak_stds.front());
}

TEST_CASE("evaluate_mse: identical models score zero, repeats agree") {
    TeacherSpec spec;
    spec.in_dim = 4;
    spec.out_dim = 2;
    spec.hidden_dim = 8;
    spec.depth = 2;
    spec.seed = 21;
    const Model teacher = make_teacher(spec);
    CHECK(evaluate_mse(teacher, teacher, 4096, 77) == 0.0);

    StudentSpec sspec;
    sspec.type = "mlp";
    sspec.hidden_dim = 8;
    sspec.seed = 5;
    const Model student = build_student(sspec, 4, 2);
    const double m1 = evaluate_mse(student, teacher, 4096, 77);
    const double m2 = evaluate_mse(student, teacher, 4096, 77);
    CHECK(m1 == m2);
    CHECK(m1 > 0.0);

    // constant-zero model vs zero-mean stream scores ~ the target variance
    Model zero;
    MlpBlock blk;
    blk.lin.n_in = 4;
    blk.lin.n_out = 2;
    blk.lin.W = Matrix(2, 4);
    blk.lin.b.assign(2, 0.0);
    zero.blocks.push_back(std::move(blk));
    const double mse0 = evaluate_mse(zero, teacher, 65536, 78);
    RandomStream rs(78, "variance.ref");
    Matrix X(65536, 4);
    sample_inputs(rs, X);
    const Matrix T = model_infer(teacher, X);
    double var = 0.0;
    for (std::size_t i = 0; i < T.size(); ++i) var += T.data()[i] * T.data()[i];
    var /= T.size();
    CHECK(mse0 == Catch::Approx(var).epsilon(0.05));
}

TEST_CASE("train_distill: losses decompose and stay finite; history is complete") {
    TeacherSpec tspec;
    tspec.in_dim = 4;
    tspec.out_dim = 1;
    tspec.hidden_dim = 16;
    tspec.depth = 2;
    tspec.seed = 31;
    const Model teacher = make_teacher(tspec);

    StudentSpec sspec;
    sspec.type = "lmkan";
    sspec.hidden_dim = 8;
    sspec.G = 4;
    sspec.seed = 32;

    PhaseConfig cfg;
    cfg.phase1_steps = 20;
    cfg.phase2_steps = 40;
    cfg.phase3_steps = 40;
    cfg.phase4_steps = 100;
    cfg.lambda_init = 1.0;
    cfg.lambda_target = 1e-20;
    cfg.lr = 3e-3;
    cfg.batch_size = 64;
    cfg.seed = 33;

    TrainOptions opt;
    opt.eval_samples = 4096;
    Model student = build_student(sspec, 4, 1);
    const TrainResult res = train_distill(std::move(student), teacher, cfg, opt);

    REQUIRE(res.history.rows.size() == static_cast<std::size_t>(cfg.total_steps()));
    double prev_gamma = -1.0, prev_lambda = 1e300;
    for (const auto& row : res.history.rows) {
        REQUIRE(std::isfinite(row.total_loss));
        REQUIRE(std::isfinite(row.pure_loss));
        CHECK(row.gamma >= prev_gamma);
        CHECK(row.lambda <= prev_lambda);
        prev_gamma = row.gamma;
        prev_lambda = row.lambda;
        CHECK(row.total_loss >= row.pure_loss - 1e-12);
    }
    CHECK(std::isfinite(res.final_mse));
}

TEST_CASE("self-distillation of an exact architecture copy is free") {
    TeacherSpec tspec;
    tspec.in_dim = 4;
    tspec.out_dim = 2;
    tspec.hidden_dim = 8;
    tspec.depth = 2;
    tspec.seed = 41;
    const Model teacher = make_teacher(tspec);
    // student IS the teacher (copied weights): zero loss from step one
    const double mse = evaluate_mse(teacher, teacher, 8192, 42);
    CHECK(mse < 1e-20);
}

TEST_CASE("identical configs produce identical training runs") {
    TeacherSpec tspec;
    tspec.in_dim = 4;
    tspec.out_dim = 1;
    tspec.hidden_dim = 8;
    tspec.depth = 1;
    tspec.seed = 51;
    const Model teacher = make_teacher(tspec);

    StudentSpec sspec;
    sspec.type = "mlp";
    sspec.hidden_dim = 8;
    sspec.seed = 52;

    PhaseConfig cfg;
    cfg.phase4_steps = 60;
    cfg.batch_size = 32;
    cfg.seed = 53;
    TrainOptions opt;
    opt.eval_samples = 1024;

    const TrainResult r1 = train_distill(build_student(sspec, 4, 1), teacher, cfg, opt);
    const TrainResult r2 = train_distill(build_student(sspec, 4, 1), teacher, cfg, opt);
    REQUIRE(r1.final_mse == r2.final_mse);
    REQUIRE(r1.history.rows.size() == r2.history.rows.size());
    for (std::size_t i = 0; i < r1.history.rows.size(); ++i)
        REQUIRE(r1.history.rows[i].total_loss == r2.history.rows[i].total_loss);
}

TEST_CASE("sweep_grid_resolution emits one row per G and keeps going") {
    TeacherSpec tspec;
    tspec.in_dim = 4;
    tspec.out_dim = 1;
    tspec.hidden_dim = 8;
    tspec.depth = 1;
    tspec.seed = 61;
    const Model teacher = make_teacher(tspec);

    StudentSpec sspec;
    sspec.type = "lmkan";
    sspec.hidden_dim = 4;
    sspec.seed = 62;

    PhaseConfig cfg;
    cfg.phase2_steps = 10;
    cfg.phase4_steps = 30;
    cfg.batch_size = 32;
    cfg.seed = 63;
    TrainOptions opt;
    opt.eval_samples = 512;

    const auto rows = sweep_grid_resolution(sspec, teacher, cfg, {4, 2, 6}, opt);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].ok);
    CHECK(std::isfinite(rows[0].final_mse));
    CHECK_FALSE(rows[1].ok);  // G = 2 is rejected, sweep continues
    CHECK(rows[2].ok);

    // single-element sweep equals a direct call
    const auto single = sweep_grid_resolution(sspec, teacher, cfg, {4}, opt);
    REQUIRE(single.size() == 1);
    CHECK(single[0].final_mse == rows[0].final_mse);
}

TEST_CASE("mlp-parity: linear sheets with gamma 1 track a dense model") {
    // an lmkan layer whose sheets are frozen to linear form must match a
    // same-shape linear map on random probes
    LmKanLayer layer = init_layer(6, 4, 4, 71, 0.0);
    layer.gamma = 1.0;
    RandomStream rs(72, "parity");
    Matrix A(4, 3), B(4, 3), C(4, 3);
    for (std::size_t i = 0; i < A.size(); ++i) {
        A.data()[i] = rs.normal();
        B.data()[i] = rs.normal();
        C.data()[i] = rs.normal();
    }
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 4; ++q) {
            Func2D f(4);
            for (int i = 0; i <= 4; ++i)
                for (int j = 0; j <= 4; ++j)
                    f.at(i, j) = A(q, p) * layer.grid.points[i] +
                                 B(q, p) * layer.grid.points[j] + C(q, p);
            layer.set_sheet(p, q, f);
        }
    Linear ref;
    ref.n_in = 6;
    ref.n_out = 4;
    ref.W = Matrix(4, 6);
    ref.b.assign(4, 0.0);
    for (int q = 0; q < 4; ++q) {
        for (int p = 0; p < 3; ++p) {
            ref.W(q, 2 * p) = A(q, p);
            ref.W(q, 2 * p + 1) = B(q, p);
            ref.b[q] += C(q, p);
        }
    }
    Matrix X(128, 6);
    sample_inputs(rs, X);
    Matrix got, want;
    lmkan_forward(layer, X, got);
    linear_forward(ref, X, want);
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(std::abs(got.data()[i] - want.data()[i]) <= 1e-10);
}
