#include "ncd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "ncd/augment.hpp"
#include "ncd/image.hpp"
#include "ncd/optimizer.hpp"

namespace ncd {
namespace {

using nlohmann::json;

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), x.cols());
    for (std::size_t t = 0; t < rows.size(); ++t) out.set_row(t, x.row(rows[t]));
    return out;
}

// One matrix per view (globals first), rows aligned with `abs_rows`.
std::vector<Matrix> build_view_batches(const DatasetSplit& split, const Matrix& lab_x,
                                       const Matrix& unlab_x,
                                       const std::vector<std::size_t>& abs_rows,
                                       std::size_t n_l, const AugPreset& preset, int n_local,
                                       const Rng& epoch_rng) {
    const std::size_t b = abs_rows.size();
    const std::size_t dim = split.payload.flat_dim();
    const int n_views = 2 + n_local;
    std::vector<Matrix> views(n_views, Matrix(b, dim));

    for (std::size_t t = 0; t < b; ++t) {
        const std::size_t abs = abs_rows[t];
        const float* src = abs < n_l ? lab_x.row_ptr(abs) : unlab_x.row_ptr(abs - n_l);
        Rng rng = epoch_rng.child(abs);
        if (split.payload.kind == PayloadKind::vector) {
            std::vector<float> x(src, src + dim);
            VectorViewSet vs = build_vector_view_set(x, preset, n_local, rng);
            for (int v = 0; v < 2; ++v) {
                std::copy(vs.globals[v].begin(), vs.globals[v].end(), views[v].row_ptr(t));
            }
            for (int v = 0; v < n_local; ++v) {
                std::copy(vs.locals[v].begin(), vs.locals[v].end(),
                          views[2 + v].row_ptr(t));
            }
        } else {
            Image img = unflatten(std::vector<float>(src, src + dim), split.payload.height,
                                  split.payload.width, split.payload.channels);
            ViewSet vs = build_view_set(img, preset, n_local, rng);
            for (int v = 0; v < 2; ++v) {
                std::copy(vs.globals[v].pixels.begin(), vs.globals[v].pixels.end(),
                          views[v].row_ptr(t));
            }
            for (int v = 0; v < n_local; ++v) {
                std::copy(vs.locals[v].pixels.begin(), vs.locals[v].pixels.end(),
                          views[2 + v].row_ptr(t));
            }
        }
    }
    return views;
}

double probe_kmeans_acc(const Network& net, const DatasetSplit& split,
                        const ClusteringConfig& cc, std::uint64_t seed) {
    if (split.unlabelled.x.rows() == 0) return 0.0;
    Matrix feats = forward_features(net, split.unlabelled.x);
    l2_normalize_rows(feats);
    const ClusterResult km =
        kmeans(feats, split.novel_classes.size(), seed, cc.max_iters, cc.restarts);
    return hungarian_acc(km.labels, split.eval.unlabelled_truth,
                         split.novel_classes.size())
        .acc;
}

void write_json_line(std::ostream& out, const json& j) { out << j.dump() << "\n"; }

std::string csv_float(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

Dataset resolve_dataset(const RunConfig& cfg) {
    if (cfg.dataset.kind == "gaussians") {
        return synth_gaussians(cfg.dataset.n_base, cfg.dataset.n_novel, cfg.dataset.dim,
                               cfg.dataset.per_class, cfg.dataset.separation, cfg.seed);
    }
    if (cfg.dataset.kind == "glyphs") {
        return synth_glyphs(cfg.dataset.n_base, cfg.dataset.n_novel, cfg.dataset.size,
                            cfg.dataset.per_class, cfg.seed, cfg.dataset.jitter);
    }
    return load_dataset(cfg.dataset.path);
}

DatasetSplit resolve_splits(const RunConfig& cfg) {
    const Dataset ds = resolve_dataset(cfg);
    return make_splits(ds, ds.base_classes);
}

Stage1Result run_stage1(const RunConfig& cfg, const DatasetSplit& split) {
    const std::size_t n_l = split.labelled.x.rows();
    const std::size_t n_u = split.unlabelled.x.rows();
    const std::size_t n_base = split.base_classes.size();
    const std::size_t k = split.novel_classes.size();
    const std::size_t total = n_l + n_u;
    if (total == 0) throw EmptyBatch("run_stage1: no training samples");

    std::vector<std::size_t> widths;
    widths.push_back(static_cast<std::size_t>(split.payload.flat_dim()));
    widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
    widths.push_back(cfg.embed_dim);

    Rng root(cfg.seed, 0x7374616765ULL);
    Rng init_rng = root.child(1);
    Network net = make_network(widths, n_base, k, init_rng);
    Network teacher = net;
    Rng head_rng = root.child(2);
    DistillHead student_head =
        make_distill_head(cfg.distill.out_dim, cfg.embed_dim, cfg.distill.tau_s,
                          cfg.distill.tau_t, cfg.distill.center_momentum, head_rng);
    DistillHead teacher_head = student_head;
    PrototypeBank bank = init_from_classifier(net.novel_head_rows(), cfg.stage1.proto_beta);

    const std::size_t steps_per_epoch = (total + cfg.stage1.batch_size - 1) / cfg.stage1.batch_size;
    LrSchedule schedule{cfg.resolved_base_lr(), cfg.stage1.floor_lr,
                        static_cast<std::int64_t>(cfg.stage1.warmup_epochs * steps_per_epoch),
                        static_cast<std::int64_t>(cfg.stage1.epochs * steps_per_epoch)};

    std::vector<Matrix*> params = net.parameters();
    params.push_back(&student_head.proj);
    OptimizerState opt = make_adamw(params, cfg.stage1.weight_decay);

    const int n_local = cfg.distill.n_local;
    const int n_views = 2 + n_local;

    Stage1Result result;
    std::int64_t global_step = 0;

    for (std::size_t epoch = 0; epoch < cfg.stage1.epochs; ++epoch) {
        std::vector<std::size_t> order(total);
        for (std::size_t i = 0; i < total; ++i) order[i] = i;
        Rng shuffle_rng = root.child(0x100 + epoch);
        shuffle_rng.shuffle(order);
        Rng epoch_aug_rng = Rng(cfg.seed, 0x617567ULL).child(epoch);
        Rng bootstrap_rng = root.child(0x9000 + epoch);

        Stage1EpochStats stats;
        stats.epoch = epoch;
        std::vector<std::size_t> assign_counts(k, 0);
        std::size_t assigned_total = 0;
        double sum_ins = 0.0, sum_cls = 0.0, sum_pas = 0.0;
        std::size_t batches = 0;

        for (std::size_t start = 0; start < total; start += cfg.stage1.batch_size) {
            const std::size_t stop = std::min(total, start + cfg.stage1.batch_size);
            std::vector<std::size_t> abs_rows(order.begin() + start, order.begin() + stop);
            const std::size_t b = abs_rows.size();

            std::vector<Matrix> views =
                build_view_batches(split, split.labelled.x, split.unlabelled.x, abs_rows, n_l,
                                   cfg.augment, n_local, epoch_aug_rng);

            const int views_used = cfg.ablation.instdis ? n_views : 1;
            std::vector<ForwardResult> sfwd(views_used);
            for (int v = 0; v < views_used; ++v) sfwd[v] = forward(net, views[v]);

            Gradients grads = zero_gradients(net);
            Matrix d_proj(student_head.proj.rows(), student_head.proj.cols());
            std::vector<Matrix> d_feats(views_used);

            if (cfg.ablation.instdis) {
                std::vector<Matrix> teacher_probs(2);
                Matrix teacher_z_stack(2 * b, student_head.out_dim());
                for (int g = 0; g < 2; ++g) {
                    const Matrix tf = forward_features(teacher, views[g]);
                    Matrix z = head_project(teacher_head, tf);
                    for (std::size_t i = 0; i < b; ++i) {
                        teacher_z_stack.set_row(g * b + i, z.row(i));
                    }
                    for (std::size_t i = 0; i < z.rows(); ++i) {
                        float* row = z.row_ptr(i);
                        for (std::size_t j = 0; j < z.cols(); ++j) {
                            row[j] -= teacher_head.center(0, j);
                        }
                    }
                    teacher_probs[g] = softmax_rows(z, teacher_head.tau_t);
                }
                std::vector<Matrix> student_probs(n_views);
                for (int v = 0; v < n_views; ++v) {
                    student_probs[v] = softmax_rows(head_project(student_head, sfwd[v].features),
                                                    student_head.tau_s);
                }
                InstanceLossResult ins =
                    instance_loss(teacher_probs, student_probs, student_head.tau_s);
                sum_ins += ins.loss;
                for (int v = 0; v < n_views; ++v) {
                    HeadBackwardResult hb =
                        head_backward(student_head, sfwd[v].features, ins.d_student_logits[v]);
                    add_in_place(d_proj, hb.d_proj);
                    d_feats[v] = std::move(hb.d_features);
                }
                update_center(teacher_head, teacher_z_stack);
            }

            // category path on the first global view
            std::vector<std::size_t> unlab_pos; // positions inside the batch
            for (std::size_t t = 0; t < b; ++t) {
                if (abs_rows[t] >= n_l) unlab_pos.push_back(t);
            }
            Matrix d_logits(b, net.num_classes());
            bool have_logit_grad = false;

            // no novel classes: the run degenerates to supervised training
            if (cfg.ablation.catdis && k > 0) {
                std::vector<int> labels(b);
                std::vector<LabelSource> sources(b);
                Matrix unlab_feats = gather_rows(sfwd[0].features, unlab_pos);

                std::vector<int> pseudo_labels;
                std::vector<float> pseudo_scores;
                if (!unlab_pos.empty()) {
                    const bool bootstrap_batch =
                        start == 0 &&
                        (cfg.stage1.bootstrap == "each_epoch" || epoch == 0);
                    if (bootstrap_batch) {
                        pseudo_labels = bootstrap_uniform(unlab_pos.size(), k, bootstrap_rng);
                        const Matrix cos = pairwise_cosine(unlab_feats, bank.p);
                        pseudo_scores.resize(unlab_pos.size());
                        for (std::size_t i = 0; i < unlab_pos.size(); ++i) {
                            pseudo_scores[i] = cos(i, pseudo_labels[i]);
                        }
                    } else {
                        PseudoBatch pb = assign(bank, unlab_feats);
                        pseudo_labels = std::move(pb.labels);
                        pseudo_scores = std::move(pb.scores);
                    }
                }
                std::size_t u = 0;
                for (std::size_t t = 0; t < b; ++t) {
                    if (abs_rows[t] < n_l) {
                        labels[t] = split.labelled.y[abs_rows[t]];
                        sources[t] = LabelSource::labelled;
                    } else {
                        labels[t] = static_cast<int>(n_base) + pseudo_labels[u++];
                        sources[t] = LabelSource::pseudo;
                    }
                }

                CategoryLossResult cat =
                    category_loss(sfwd[0].logits, labels, sources, cfg.stage1.lambda_pas,
                                  bank, n_base);
                sum_cls += cat.loss_cls;
                sum_pas += cat.loss_pas;
                d_logits = std::move(cat.d_logits);
                have_logit_grad = true;

                if (!unlab_pos.empty()) {
                    Matrix normed = unlab_feats;
                    l2_normalize_rows(normed);
                    ema_update(bank, PseudoBatch{std::move(normed), pseudo_labels,
                                                 pseudo_scores});
                }
                bank_gradient_step(bank, cat.d_p, cfg.stage1.bank_pas_lr);

                for (int lab : pseudo_labels) {
                    assign_counts[lab] += 1;
                    assigned_total += 1;
                }
            } else {
                // labelled-only cross-entropy
                std::vector<std::size_t> lab_pos;
                for (std::size_t t = 0; t < b; ++t) {
                    if (abs_rows[t] < n_l) lab_pos.push_back(t);
                }
                if (!lab_pos.empty()) {
                    const Matrix logp = log_softmax_rows(sfwd[0].logits);
                    const Matrix prob = softmax_rows(sfwd[0].logits, 1.0);
                    const double inv = 1.0 / static_cast<double>(lab_pos.size());
                    for (std::size_t t : lab_pos) {
                        const int y = split.labelled.y[abs_rows[t]];
                        sum_cls -= static_cast<double>(logp(t, y)) * inv;
                        const float* prow = prob.row_ptr(t);
                        float* grow = d_logits.row_ptr(t);
                        for (std::size_t j = 0; j < net.num_classes(); ++j) {
                            grow[j] = static_cast<float>(inv * prow[j]);
                        }
                        grow[y] -= static_cast<float>(inv);
                    }
                    have_logit_grad = true;
                }
            }

            const Matrix empty;
            for (int v = 0; v < views_used; ++v) {
                const Matrix& df = cfg.ablation.instdis ? d_feats[v] : empty;
                const Matrix& dl = (v == 0 && have_logit_grad) ? d_logits : empty;
                if (df.size() == 0 && dl.size() == 0) continue;
                grads.accumulate(backward(net, sfwd[v].tape, df, dl));
            }

            const double lr = lr_at(schedule, global_step);
            std::vector<Matrix*> grad_ptrs = grads.flat();
            grad_ptrs.push_back(&d_proj);
            optimizer_step(opt, params, grad_ptrs, lr);

            if (cfg.ablation.instdis) {
                ema_params(teacher, net, cfg.distill.teacher_momentum);
                ema_head(teacher_head, student_head, cfg.distill.teacher_momentum);
            }
            global_step += 1;
            batches += 1;
        }

        stats.loss_ins = batches ? sum_ins / batches : 0.0;
        stats.loss_cls = batches ? sum_cls / batches : 0.0;
        stats.loss_pas = batches ? sum_pas / batches : 0.0;
        if (assigned_total > 0) {
            std::size_t modal = 0;
            double entropy = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                modal = std::max(modal, assign_counts[c]);
                if (assign_counts[c] > 0) {
                    const double p = static_cast<double>(assign_counts[c]) / assigned_total;
                    entropy -= p * std::log(p);
                }
            }
            stats.modal_fraction = static_cast<double>(modal) / assigned_total;
            stats.assign_entropy = entropy;
        }
        const bool probe = cfg.stage1.eval_every > 0 &&
                           ((epoch + 1) % cfg.stage1.eval_every == 0 ||
                            epoch + 1 == cfg.stage1.epochs);
        if (probe) {
            stats.kmeans_acc = probe_kmeans_acc(net, split, cfg.clustering, cfg.seed);
        }
        result.epochs.push_back(stats);
    }

    result.checkpoint.student = std::move(net);
    result.checkpoint.teacher = std::move(teacher);
    result.checkpoint.student_head = std::move(student_head);
    result.checkpoint.teacher_head = std::move(teacher_head);
    result.checkpoint.bank = std::move(bank);
    result.checkpoint.config_hash = config_hash(cfg);
    result.checkpoint.stage = "stage1";
    result.checkpoint.step = global_step;
    return result;
}

Stage2Result run_stage2(const RunConfig& cfg, const Checkpoint& stage1_ckpt,
                        const DatasetSplit& split) {
    Stage2Result result;
    Network net = stage1_ckpt.student;

    SelfTrainOptions opts;
    opts.iterations = cfg.ablation.pst ? cfg.stage2.iterations : 0;
    opts.epochs_per_iter = cfg.stage2.epochs_per_iter;
    opts.batch_size = cfg.stage2.batch_size;
    opts.lr = cfg.stage2.lr;
    opts.momentum = cfg.stage2.momentum;
    opts.method = cfg.offline_method();
    opts.spectral_sigma = cfg.clustering.sigma;
    opts.seed = cfg.seed;

    result.selftrain = self_train(net, split, opts);
    result.checkpoint.student = std::move(net);
    result.checkpoint.config_hash = config_hash(cfg);
    result.checkpoint.stage = "stage2";
    result.checkpoint.step = stage1_ckpt.step;
    return result;
}

void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    if (cfg.dataset.kind == "manifest") {
        throw ConfigInvalid("synth requires a generator dataset kind (gaussians or glyphs)");
    }
    const Dataset ds = resolve_dataset(cfg);
    save_dataset(out_dir, ds);
}

void cmd_stage1(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cmd_stage1: cannot create " + out_dir.string());

    const DatasetSplit split = resolve_splits(cfg);
    const Stage1Result res = run_stage1(cfg, split);

    {
        std::ofstream cfg_out(out_dir / "config.json");
        if (!cfg_out) throw IoError("cmd_stage1: cannot write config.json");
        cfg_out << config_to_json(cfg) << "\n";
    }
    std::ofstream log(out_dir / "metrics.jsonl");
    if (!log) throw IoError("cmd_stage1: cannot write metrics.jsonl");
    for (const Stage1EpochStats& e : res.epochs) {
        json line = {{"stage", "stage1"},
                     {"epoch", e.epoch},
                     {"loss_ins", e.loss_ins},
                     {"loss_cls", e.loss_cls},
                     {"loss_pas", e.loss_pas},
                     {"modal_frac", e.modal_fraction},
                     {"assign_entropy", e.assign_entropy},
                     {"config_hash", res.checkpoint.config_hash}};
        if (e.kmeans_acc >= 0.0) line["kmeans_acc"] = e.kmeans_acc;
        write_json_line(log, line);
    }
    save_checkpoint(out_dir / "checkpoint", res.checkpoint);
}

void cmd_stage2(const RunConfig& cfg, const std::filesystem::path& checkpoint_dir,
                const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cmd_stage2: cannot create " + out_dir.string());

    const Checkpoint ckpt = load_checkpoint(checkpoint_dir);
    const DatasetSplit split = resolve_splits(cfg);
    const Stage2Result res = run_stage2(cfg, ckpt, split);

    std::ofstream log(out_dir / "metrics.jsonl", std::ios::app);
    if (!log) throw IoError("cmd_stage2: cannot append metrics.jsonl");
    for (const IterationMetrics& m : res.selftrain.per_iteration) {
        write_json_line(log, json{{"stage", "stage2"},
                                  {"iter", m.iter},
                                  {"novel_acc", m.metrics.novel_train_acc},
                                  {"test_old", m.metrics.test_old_acc},
                                  {"test_new", m.metrics.test_new_acc},
                                  {"test_all", m.metrics.test_all_acc},
                                  {"mean_loss", m.mean_loss},
                                  {"pseudo_label_acc", m.pseudo_label_acc},
                                  {"config_hash", res.checkpoint.config_hash}});
    }
    save_checkpoint(out_dir / "checkpoint", res.checkpoint);
}

void cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint_dir,
              const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cmd_eval: cannot create " + out_dir.string());

    const Checkpoint ckpt = load_checkpoint(checkpoint_dir);
    const std::string hash = config_hash(cfg);
    if (ckpt.config_hash != hash) {
        throw ConfigInvalid("cmd_eval: checkpoint was produced by config " + ckpt.config_hash +
                            ", current config hashes to " + hash);
    }
    const DatasetSplit split = resolve_splits(cfg);
    const SplitMetrics metrics = eval_splits(ckpt.student, split);

    double baseline = 0.0;
    if (split.unlabelled.x.rows() > 0) {
        const ClusterResult km =
            kmeans(split.unlabelled.x, split.novel_classes.size(), cfg.seed,
                   cfg.clustering.max_iters, cfg.clustering.restarts);
        baseline = hungarian_acc(km.labels, split.eval.unlabelled_truth,
                                 split.novel_classes.size())
                       .acc;
    }

    {
        std::ofstream out(out_dir / "acc.json");
        if (!out) throw IoError("cmd_eval: cannot write acc.json");
        out << json{{"config_hash", hash},
                    {"novel_train_acc", metrics.novel_train_acc},
                    {"test_old_acc", metrics.test_old_acc},
                    {"test_new_acc", metrics.test_new_acc},
                    {"test_all_acc", metrics.test_all_acc},
                    {"baseline_raw_kmeans_acc", baseline}}
                   .dump(2)
            << "\n";
    }
    {
        std::ofstream out(out_dir / "confusion.csv");
        if (!out) throw IoError("cmd_eval: cannot write confusion.csv");
        for (const auto& row : metrics.novel_train_report.confusion) {
            for (std::size_t j = 0; j < row.size(); ++j) {
                out << row[j] << (j + 1 < row.size() ? "," : "");
            }
            out << "\n";
        }
    }
    {
        std::ofstream out(out_dir / "embeddings.csv");
        if (!out) throw IoError("cmd_eval: cannot write embeddings.csv");
        out << "split,class";
        for (std::size_t j = 0; j < ckpt.student.embed_dim(); ++j) out << ",f" << j;
        out << "\n";
        const std::size_t n_base = split.base_classes.size();
        auto dump = [&](const char* tag, const Matrix& x, const std::vector<int>& y) {
            const Matrix feats = forward_features(ckpt.student, x);
            for (std::size_t i = 0; i < x.rows(); ++i) {
                out << tag << "," << y[i];
                for (std::size_t j = 0; j < feats.cols(); ++j) {
                    out << "," << csv_float(feats(i, j));
                }
                out << "\n";
            }
        };
        dump("labelled", split.labelled.x, split.labelled.y);
        std::vector<int> unlab_global(split.eval.unlabelled_truth.size());
        for (std::size_t i = 0; i < unlab_global.size(); ++i) {
            unlab_global[i] = static_cast<int>(n_base) + split.eval.unlabelled_truth[i];
        }
        dump("unlabelled", split.unlabelled.x, unlab_global);
        dump("test", split.test.x, split.test.y);
    }
}

} // namespace ncd
