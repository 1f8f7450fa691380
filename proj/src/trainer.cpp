#include "ludvae/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ludvae/checkpoint.hpp"
#include "ludvae/data.hpp"
#include "ludvae/errors.hpp"
#include "ludvae/objective.hpp"
#include "ludvae/optimizer.hpp"

namespace fs = std::filesystem;

namespace ludvae {

namespace {

std::string checkpoint_name(const std::string& out_dir, long iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%08ld.lvc", iteration);
  return (fs::path(out_dir) / buf).string();
}

UnpairedDataset build_dataset(const RunConfig& cfg, const std::string& out_dir) {
  PreparedDomains domains =
      prepare_domains(cfg.data.clean_dir, cfg.data.noisy_dir, cfg.task, cfg.seed,
                      (fs::path(out_dir) / "domain_manifest.tsv").string());
  UnpairedDataset ds;
  ds.crop_size = cfg.data.crop;
  ds.batch_size = cfg.data.batch;
  std::vector<IngestionEntry> report;
  auto admit = [&](std::vector<Image>& imgs, std::vector<std::string>& paths,
                   std::vector<Image>& dst, std::vector<std::string>& dst_paths) {
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      IngestionEntry e;
      e.path = paths[i];
      e.width = imgs[i].width();
      e.height = imgs[i].height();
      e.channels = imgs[i].channels();
      if (imgs[i].height() < cfg.data.crop || imgs[i].width() < cfg.data.crop) {
        e.reason = "smaller than crop size " + std::to_string(cfg.data.crop);
      } else if (imgs[i].channels() != cfg.model.input_channels) {
        e.reason = "channel count != model input_channels";
      } else {
        e.accepted = true;
        dst.push_back(std::move(imgs[i]));
        dst_paths.push_back(paths[i]);
      }
      report.push_back(std::move(e));
    }
  };
  admit(domains.source, domains.source_paths, ds.source, ds.source_paths);
  admit(domains.target, domains.target_paths, ds.target, ds.target_paths);
  write_ingestion_manifest((fs::path(out_dir) / "ingestion_manifest.tsv").string(), report);
  ds.validate(cfg.model.spatial_divisor());
  return ds;
}

}  // namespace

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  config.validate(true);
  fs::create_directories(options.out_dir);

  UnpairedDataset dataset = build_dataset(config, options.out_dir);

  LudVae<float> model(config.model);
  AdamConfig acfg;
  acfg.lr = config.optimizer.lr;
  acfg.beta1 = config.optimizer.beta1;
  acfg.beta2 = config.optimizer.beta2;
  acfg.eps = config.optimizer.eps;
  Adam<float> adam(model.params().size(), acfg);

  long start_iter = 0;
  if (!options.resume_checkpoint.empty()) {
    CheckpointData ck = load_checkpoint(options.resume_checkpoint);
    restore_checkpoint(ck, model, &adam);
    start_iter = ck.iteration;
  } else {
    Rng init_rng(Rng::mix(config.seed, Rng::hash("init")));
    model.init_parameters(init_rng);
  }

  const std::string metrics_path = (fs::path(options.out_dir) / "metrics.csv").string();
  std::ofstream metrics(metrics_path, start_iter > 0 ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IoError("cannot write metrics log: " + metrics_path);
  if (start_iter == 0)
    metrics << "iteration,recon_clean,recon_noisy,kl_total,anneal_weight,total,lr\n";

  ObjectiveOptions opts;
  opts.sigma_y = config.task.sigma_y;
  opts.kl_scale = config.objective.kl_scale;
  opts.anneal_warmup = config.objective.anneal_warmup;
  opts.preprocess_degradation_input = config.objective.preprocess_degradation_input;

  const nlohmann::json config_json = run_config_to_json(config);
  std::vector<float> grads(model.params().size(), 0.f);

  TrainResult result;
  auto save = [&](long next_iter) {
    const std::string path = checkpoint_name(options.out_dir, next_iter);
    save_checkpoint(path, snapshot_checkpoint(model, adam, next_iter, config.seed, config_json));
    result.last_good_checkpoint = path;
    return path;
  };

  for (long iter = start_iter; iter < config.optimizer.total_iters; ++iter) {
    // All randomness of one iteration flows from (seed, iter): the batch,
    // the pre-processor noise and the reparametrization draws. Resuming from
    // a checkpoint therefore replays the identical stream.
    Rng iter_rng(Rng::mix(Rng::mix(config.seed, Rng::hash("train_iter")), iter));
    Batch batch = sample_batch(dataset, iter_rng);

    std::fill(grads.begin(), grads.end(), 0.f);
    const double item_weight = 1.0 / static_cast<double>(config.data.batch);
    LossBreakdown avg;
    avg.kl_zn_per_layer.assign(config.model.num_layers, 0.0);
    for (int b = 0; b < config.data.batch; ++b) {
      ObjectiveOptions item_opts = opts;
      item_opts.sigma_x = config.task.sigma_x.draw(iter_rng);
      LossBreakdown lb = total_loss(batch.clean[b], batch.corrupted[b], model, iter, iter_rng,
                                    item_opts, grads.data(), item_weight);
      avg.recon_clean += lb.recon_clean * item_weight;
      avg.recon_noisy += lb.recon_noisy * item_weight;
      for (int l = 0; l < config.model.num_layers; ++l)
        avg.kl_zn_per_layer[l] += lb.kl_zn_per_layer[l] * item_weight;
      avg.anneal_weight = lb.anneal_weight;
    }
    avg.total = 0.5 * avg.recon_clean + 0.5 * avg.recon_noisy + avg.anneal_weight * avg.kl_total();

    if (!std::isfinite(avg.total)) {
      result.aborted = true;
      result.abort_reason = "non-finite loss at iteration " + std::to_string(iter);
      result.iterations_run = iter - start_iter;
      std::ofstream note((fs::path(options.out_dir) / "ABORTED").string());
      note << result.abort_reason << "\nlast good checkpoint: " << result.last_good_checkpoint
           << "\n";
      return result;
    }

    const double lr = config.optimizer.lr_at(iter);
    adam.step(model.params().values(), grads, lr);

    char line[256];
    std::snprintf(line, sizeof(line), "%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", iter,
                  avg.recon_clean, avg.recon_noisy, avg.kl_total(), avg.anneal_weight, avg.total,
                  lr);
    metrics << line;
    metrics.flush();

    const long next_iter = iter + 1;
    if (next_iter % config.checkpoint_every == 0 && next_iter < config.optimizer.total_iters)
      save(next_iter);
    if (options.progress && !options.progress(iter, avg.total)) {
      result.final_checkpoint = save(next_iter);
      result.iterations_run = next_iter - start_iter;
      return result;
    }
  }

  result.final_checkpoint = save(config.optimizer.total_iters);
  result.iterations_run = config.optimizer.total_iters - start_iter;
  return result;
}

}  // namespace ludvae
