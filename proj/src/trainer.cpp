#include "ssae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "ssae/checkpoint.hpp"
#include "ssae/image_io.hpp"
#include "ssae/image_ops.hpp"

namespace fs = std::filesystem;

namespace ssae {

std::vector<ScheduleStage> parse_schedule(const std::string& text) {
    std::vector<ScheduleStage> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const size_t colon = item.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("bad schedule entry '" + item + "' (expected side:steps)");
        out.push_back({std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
    }
    if (out.empty()) throw std::invalid_argument("empty schedule");
    return out;
}

std::string schedule_to_string(const std::vector<ScheduleStage>& schedule) {
    std::string s;
    for (const auto& st : schedule)
        s += (s.empty() ? "" : ",") + std::to_string(st.side) + ":" + std::to_string(st.steps);
    return s;
}

void TrainConfig::validate() const {
    objective.validate();
    augmentation.validate();
    if (learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (schedule.empty()) throw std::invalid_argument("training schedule must be nonempty");
    int prev = 0;
    for (const auto& st : schedule) {
        if (st.side < 8 || st.side % 8 != 0)
            throw std::invalid_argument("schedule sides must be positive multiples of 8");
        if (st.side < prev) throw std::invalid_argument("schedule sides must be non-decreasing");
        if (st.steps < 1) throw std::invalid_argument("schedule step counts must be positive");
        prev = st.side;
    }
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (eval_interval < 1) throw std::invalid_argument("eval interval must be >= 1");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw std::invalid_argument("validation fraction must be in [0,1)");
}

namespace {

double clean_recon_error(nn::Network& net, const Tensor& img) {
    const Tensor recon = net.forward(img, false);
    double s = 0.0;
    for (size_t i = 0; i < img.v.size(); ++i) {
        const double d = static_cast<double>(recon.v[i]) - img.v[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double criterion_over_images(nn::Network& net, const std::vector<Tensor>& images,
                             const TrainConfig& cfg, int side) {
    if (images.empty()) throw std::runtime_error("validation criterion: empty validation set");
    double acc = 0.0;
    for (size_t i = 0; i < images.size(); ++i) {
        const Tensor img = (images[i].h == side && images[i].w == side)
                               ? images[i]
                               : resize_bilinear(images[i], side, side);
        if (cfg.objective.variant == ObjectiveVariant::v1) {
            acc += clean_recon_error(net, img);
        } else {
            const double scale = static_cast<double>(side) / std::min(images[i].h, images[i].w);
            const DistortionSample s = generate_training_pair(
                img, cfg.distortion.scaled(scale), derive_seed(cfg.seed, 0x76616c64, i, side));
            const Tensor recon = net.forward(s.distorted, false);
            acc += objective_loss(cfg.objective, recon, s.truth, s.distorted, s.mask);
        }
    }
    return acc / static_cast<double>(images.size());
}

// Stateless per-epoch reshuffle so resumed runs replay identical batches.
struct EpochSampler {
    size_t n = 0;
    uint64_t seed = 0;
    long cached_epoch = -1;
    std::vector<size_t> order;

    size_t sample(long global_index) {
        const long epoch = global_index / static_cast<long>(n);
        if (epoch != cached_epoch) {
            order.resize(n);
            for (size_t i = 0; i < n; ++i) order[i] = i;
            Rng rng(derive_seed(seed, 0x6f726472, static_cast<uint64_t>(epoch)));
            rng.shuffle(order);
            cached_epoch = epoch;
        }
        return order[global_index % static_cast<long>(n)];
    }
};

}  // namespace

double validation_criterion(nn::Network& net, const DatasetIndex& index, const TrainConfig& cfg,
                            int side) {
    if (index.validation.empty())
        throw std::runtime_error("validation criterion: validation split is empty");
    std::vector<Tensor> images;
    for (const auto& rec : index.validation) images.push_back(load_png(rec.image_path, true));
    return criterion_over_images(net, images, cfg, side);
}

std::string loss_log_to_csv(const TrainState& state) {
    std::ostringstream out;
    out << "step,side,train_loss,val_criterion\n";
    std::map<long, double> val_at;
    for (const auto& [s, v] : state.val_history) val_at[s] = v;
    char buf[128];
    for (size_t i = 0; i < state.loss_history.size(); ++i) {
        const long step = static_cast<long>(i) + 1;
        const int side = i < state.side_history.size() ? state.side_history[i] : state.side;
        if (val_at.count(step))
            std::snprintf(buf, sizeof(buf), "%ld,%d,%.9g,%.9g\n", step, side, state.loss_history[i],
                          val_at[step]);
        else
            std::snprintf(buf, sizeof(buf), "%ld,%d,%.9g,\n", step, side, state.loss_history[i]);
        out << buf;
    }
    return out.str();
}

TrainResult train(const DatasetIndex& raw_index, const nn::ModelConfig& model_cfg,
                  const TrainConfig& cfg, const fs::path& run_dir, bool resume) {
    cfg.validate();
    model_cfg.validate();

    DatasetIndex index = raw_index;
    if (index.validation.empty() && cfg.val_fraction > 0.0)
        index = hold_out_validation(index, cfg.val_fraction, cfg.seed);
    if (index.train.empty()) throw std::runtime_error("train: no training images");

    const fs::path ckpt_dir = run_dir / "checkpoints";
    fs::create_directories(ckpt_dir);

    // decode once; every record must come from the train split
    std::vector<Tensor> train_images;
    for (const auto& rec : index.train) {
        if (rec.split != Split::train)
            throw std::logic_error("non-train record in training set: " + rec.image_path.string());
        train_images.push_back(load_png(rec.image_path, true));
    }
    std::vector<Tensor> val_images;
    for (const auto& rec : index.validation) val_images.push_back(load_png(rec.image_path, true));

    TrainResult result;
    result.net = std::make_unique<nn::Network>(model_cfg);
    result.net->init_params(cfg.seed);
    nn::Adam adam(result.net->params(), cfg.learning_rate);

    TrainState& state = result.state;
    state.best_val = std::numeric_limits<double>::infinity();

    long start_step = 0;
    int bad_evals = 0;
    const fs::path resume_path = ckpt_dir / "resume.ckpt";
    if (resume) {
        if (!fs::exists(resume_path))
            throw std::runtime_error("resume requested but no snapshot at " + resume_path.string());
        TensorFile snap = read_tensor_file(resume_path);
        const nn::ModelConfig snap_cfg = model_config_from_json(snap.meta.at("model_config"));
        if (!(snap_cfg == model_cfg)) throw std::runtime_error("resume snapshot model config mismatch");
        auto fill = [&](const nn::ParamRef& ref) {
            const std::vector<float>* data = snap.find(ref.name);
            if (!data || data->size() != ref.value->size())
                throw std::runtime_error("resume snapshot missing tensor " + ref.name);
            ref.value->v = *data;
        };
        for (const auto& p : result.net->params()) fill(p);
        for (const auto& s : result.net->state()) fill(s);
        const std::vector<float>* adam_state = snap.find("optimizer.adam");
        if (!adam_state) throw std::runtime_error("resume snapshot missing optimizer state");
        adam.restore_state(*adam_state, snap.meta.at("adam_t").get<long>());
        start_step = snap.meta.at("step").get<long>();
        state.best_val = snap.meta.at("best_val").get<double>();
        state.best_step = snap.meta.at("best_step").get<long>();
        bad_evals = snap.meta.at("bad_evals").get<int>();
        state.loss_history = snap.meta.at("loss_history").get<std::vector<double>>();
        state.side_history = snap.meta.at("side_history").get<std::vector<int>>();
        for (const auto& e : snap.meta.at("val_history"))
            state.val_history.emplace_back(e.at(0).get<long>(), e.at(1).get<double>());
    }

    auto save_resume_snapshot = [&](long step) {
        TensorFile snap;
        snap.meta["kind"] = "ssae-train-state";
        snap.meta["model_config"] = model_config_to_json(model_cfg);
        snap.meta["step"] = step;
        snap.meta["adam_t"] = adam.step_count();
        snap.meta["best_val"] = state.best_val;
        snap.meta["best_step"] = state.best_step;
        snap.meta["bad_evals"] = bad_evals;
        snap.meta["loss_history"] = state.loss_history;
        snap.meta["side_history"] = state.side_history;
        nlohmann::json vh = nlohmann::json::array();
        for (const auto& [s, v] : state.val_history) vh.push_back({s, v});
        snap.meta["val_history"] = vh;
        for (const auto& p : result.net->params()) snap.tensors.emplace_back(p.name, p.value->v);
        for (const auto& s : result.net->state()) snap.tensors.emplace_back(s.name, s.value->v);
        snap.tensors.emplace_back("optimizer.adam", adam.serialize_state());
        write_tensor_file(resume_path, snap);
    };

    auto flush_loss_csv = [&]() {
        std::ofstream out(run_dir / "loss.csv", std::ios::trunc);
        out << loss_log_to_csv(state);
    };

    EpochSampler sampler{train_images.size(), derive_seed(cfg.seed, 0x736d706c), -1, {}};

    auto evaluate_validation = [&](long step, int side) {
        if (val_images.empty()) return false;
        const double crit = criterion_over_images(*result.net, val_images, cfg, side);
        state.val_history.emplace_back(step, crit);
        if (crit < state.best_val) {
            state.best_val = crit;
            state.best_step = step;
            bad_evals = 0;
            save_network(ckpt_dir / "best.ckpt", *result.net);
            state.checkpoints["best"] = ckpt_dir / "best.ckpt";
        } else {
            ++bad_evals;
        }
        return cfg.early_stop && bad_evals >= cfg.patience;
    };

    long step = start_step;
    bool stop = false;
    long stage_begin = 0;
    for (size_t stage = 0; stage < cfg.schedule.size() && !stop; ++stage) {
        const auto& st = cfg.schedule[stage];
        const int side = st.side;
        const long stage_end = stage_begin + st.steps;
        bool ran_any = false;
        state.side = side;
        while (step < stage_end && !stop) {
            ran_any = true;
            Tensor batch_x(cfg.batch_size, 3, side, side);
            Tensor batch_xhat(cfg.batch_size, 3, side, side);
            std::vector<Tensor> masks(cfg.batch_size);
            std::vector<std::string> provenance;
            const uint64_t batch_seed = derive_seed(cfg.seed, 0x62617463, step);
            for (int j = 0; j < cfg.batch_size; ++j) {
                const long g = step * cfg.batch_size + j;
                const size_t idx = sampler.sample(g);
                const DatasetRecord& rec = index.train[idx];
                provenance.push_back(rec.image_path.string());

                Tensor img =
                    augment(train_images[idx], cfg.augmentation, derive_seed(cfg.seed, 0x617567, g));
                const double scale = static_cast<double>(side) / std::min(img.h, img.w);
                if (img.h != side || img.w != side) img = resize_bilinear(img, side, side);
                const DistortionSample sample = generate_training_pair(
                    img, cfg.distortion.scaled(scale), derive_seed(cfg.seed, 0x64697374, g));
                if (cfg.dump_samples > 0 && g < cfg.dump_samples) {
                    fs::create_directories(cfg.dump_dir);
                    dump_triptych(sample, cfg.dump_dir / ("sample_" + std::to_string(g) + ".png"));
                }
                batch_x.set_slice(j, sample.truth);
                batch_xhat.set_slice(j, sample.distorted);
                masks[j] = sample.mask;
            }
            state.batch_audit.push_back(std::move(provenance));

            const Tensor recon = result.net->forward(batch_xhat, true);
            Tensor dloss(cfg.batch_size, 3, side, side);
            double loss = 0.0;
            const double inv_b = 1.0 / cfg.batch_size;
            for (int j = 0; j < cfg.batch_size; ++j) {
                LossAndGrad lg = objective_loss_grad(cfg.objective, recon.slice(j), batch_x.slice(j),
                                                     batch_xhat.slice(j), masks[j]);
                loss += lg.value * inv_b;
                for (float& f : lg.grad.v) f = static_cast<float>(f * inv_b);
                dloss.set_slice(j, lg.grad);
            }
            if (!std::isfinite(loss)) {
                nlohmann::json diag = {{"step", step + 1},
                                       {"batch_seed", batch_seed},
                                       {"side", side},
                                       {"objective", objective_variant_name(cfg.objective.variant)}};
                std::ofstream(run_dir / "diagnostic.json") << diag.dump(2) << "\n";
                throw std::runtime_error("non-finite training loss at step " + std::to_string(step + 1) +
                                         " (batch seed " + std::to_string(batch_seed) +
                                         "); diagnostic snapshot written");
            }

            result.net->backward(dloss);
            adam.step();

            state.loss_history.push_back(loss);
            state.side_history.push_back(side);
            ++step;
            state.step = step;

            if (step % cfg.eval_interval == 0) stop = evaluate_validation(step, side);
            if (cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0 && !stop) {
                save_resume_snapshot(step);
                flush_loss_csv();
            }
        }
        if (ran_any && step == stage_end) {
            const fs::path p = ckpt_dir / ("stage_" + std::to_string(stage) + ".ckpt");
            save_network(p, *result.net);
            state.checkpoints["stage_" + std::to_string(stage)] = p;
            save_resume_snapshot(step);
        }
        stage_begin = stage_end;
    }
    state.early_stopped = stop;

    // final validation point if the budget did not land on an interval
    if (!val_images.empty() &&
        (state.val_history.empty() || state.val_history.back().first != step))
        evaluate_validation(step, state.side);

    save_network(ckpt_dir / "final.ckpt", *result.net);
    state.checkpoints["final"] = ckpt_dir / "final.ckpt";

    // v3 (and any early-stopped run) keeps the best-validation weights
    const bool prefer_best = (cfg.objective.variant == ObjectiveVariant::v3 || cfg.early_stop) &&
                             state.checkpoints.count("best");
    const fs::path selected = prefer_best ? state.checkpoints["best"] : state.checkpoints["final"];
    fs::copy_file(selected, run_dir / "model.ckpt", fs::copy_options::overwrite_existing);
    state.checkpoints["model"] = run_dir / "model.ckpt";
    if (prefer_best) result.net = load_network(run_dir / "model.ckpt");

    flush_loss_csv();
    return result;
}

}  // namespace ssae
