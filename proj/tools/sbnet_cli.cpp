#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <system_error>

#include "sbnet/parallel.hpp"
#include "sbnet/suite.hpp"
#include "sbnet/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace sbnet;

namespace {

struct Options {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out;
  std::string data;
  std::string val;
  std::string checkpoint;
  std::string input;
  bool png = false;
  bool ensemble = false;

  std::string bottleneck = "sdwt";
  std::string loss = "l1";
  std::string optimizer = "radam";
  std::size_t blocks = 0, filters = 0, dense_layers = 0;
  int epochs = 0, steps = 0, lr_drop_epoch = 0;
  std::size_t batch = 0, patch = 0;
  double lr = 0, lr_drop_factor = 0, k_start = 0, k_min = 0, k_decay = 0;

  std::size_t count = 0, val_count = 0, size = 0;
  double noise_a = 0, noise_b = 0;
  std::size_t seeds = 1;
};

void load_defaults(Options& o) {
  const BenchConfig d = toy_bench_config();
  o.blocks = d.model.blocks;
  o.filters = d.model.filters;
  o.dense_layers = d.model.dense_layers;
  o.epochs = d.train.epochs;
  o.steps = d.train.steps_per_epoch;
  o.lr_drop_epoch = d.train.lr_drop_epoch;
  o.batch = d.train.batch_size;
  o.patch = d.train.patch_size;
  o.lr = d.train.lr0;
  o.lr_drop_factor = d.train.lr_drop_factor;
  o.k_start = d.train.loss.k_start;
  o.k_min = d.train.loss.k_min;
  o.k_decay = d.train.loss.k_decay_per_epoch;
  o.count = d.train_data.count;
  o.val_count = d.val_data.count;
  o.size = d.train_data.size;
  o.noise_a = d.train_data.noise.a;
  o.noise_b = d.train_data.noise.b;
}

BenchConfig bench_config(const Options& o) {
  BenchConfig c = toy_bench_config();
  c.model.bottleneck = parse_bottleneck_kind(o.bottleneck);
  c.model.blocks = o.blocks;
  c.model.filters = o.filters;
  c.model.dense_layers = o.dense_layers;
  c.model.seed = o.seed;
  c.train.epochs = o.epochs;
  c.train.steps_per_epoch = o.steps;
  c.train.batch_size = o.batch;
  c.train.patch_size = o.patch;
  c.train.lr0 = o.lr;
  c.train.lr_drop_epoch = o.lr_drop_epoch;
  c.train.lr_drop_factor = o.lr_drop_factor;
  c.train.loss = {parse_loss_kind(o.loss), o.k_start, o.k_min, o.k_decay};
  c.train.optimizer = parse_optimizer_kind(o.optimizer);
  c.train.seed = o.seed;
  c.train_data.count = o.count;
  c.train_data.size = o.size;
  c.train_data.noise = {o.noise_a, o.noise_b};
  c.val_data.count = o.val_count;
  c.val_data.size = o.size;
  c.val_data.noise = {o.noise_a, o.noise_b};
  c.seeds.clear();
  for (std::size_t i = 0; i < o.seeds; ++i) c.seeds.push_back(o.seed + i);
  c.ensemble_eval = o.ensemble;
  c.model.validate();
  c.train.validate();
  c.train_data.noise.validate();
  return c;
}

fs::path require_out(const Options& o) {
  if (o.out.empty()) throw std::invalid_argument("--out is required");
  fs::create_directories(o.out);
  return o.out;
}

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw std::invalid_argument(std::string(flag) + " is required");
  return value;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

int cmd_gen_data(const Options& o) {
  const BenchConfig c = bench_config(o);
  DatasetConfig d = c.train_data;
  d.seed = o.seed;
  const Dataset data = make_dataset(d, require_out(o));
  std::cout << "wrote " << data.size() << " pairs to " << o.out << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const BenchConfig c = bench_config(o);
  const Dataset train_set = o.data.empty() ? bench_train_set(c, o.seed) : load_dataset(o.data);
  const Dataset val_set = o.val.empty() ? bench_val_set(c, o.seed) : load_dataset(o.val);
  TrainOptions opts;
  opts.out_dir = require_out(o);
  opts.on_epoch = [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " loss " << r.train_loss << " k " << r.k_percent << " val_psnr "
              << r.val_psnr << '\n';
  };
  const TrainResult res = train(c.model, c.train, train_set, val_set, opts);
  std::cout << "best epoch " << res.best_epoch << " val_psnr "
            << (res.best_epoch >= 0 ? res.epochs[static_cast<std::size_t>(res.best_epoch)].val_psnr : 0.0) << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  const Checkpoint ck = load_checkpoint(require(o.checkpoint, "--checkpoint"));
  const Dataset data = load_dataset(require(o.data, "--data"));
  const EvalReport rep = evaluate(ck.model, data, o.ensemble);
  for (const EvalRow& r : rep.rows) {
    std::cout << r.id << " noisy " << r.psnr_noisy << " denoised " << r.psnr_denoised << " balance " << r.balance
              << '\n';
  }
  std::cout << "mean noisy " << rep.mean_psnr_noisy << " denoised " << rep.mean_psnr << " balance "
            << rep.mean_balance << '\n';
  if (!o.out.empty()) write_eval_csv(require_out(o) / "eval.csv", rep);
  return 0;
}

int cmd_denoise(const Options& o) {
  const Checkpoint ck = load_checkpoint(require(o.checkpoint, "--checkpoint"));
  const BayerImage noisy(load_tensor(require(o.input, "--input")));
  const BayerImage out = o.ensemble ? ensemble_denoise(ck.model, noisy) : BayerImage(denoise_plane(ck.model, noisy.plane));
  const fs::path dir = require_out(o);
  save_tensor(dir / "denoised.sbt", out.plane);
  if (o.png) write_png(dir / "denoised.png", demosaic_bilinear(out));
  std::cout << "wrote " << (dir / "denoised.sbt").string() << '\n';
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const auto rows = run_gradient_suite(o.seed);
  const std::string table = format_gradient_table(rows);
  std::cout << table;
  if (!o.out.empty()) write_text(require_out(o) / "gradcheck.txt", table);
  for (const GradCheckRow& r : rows)
    if (!r.pass) return 1;
  return 0;
}

int cmd_bench(const Options& o) {
  const BenchConfig c = bench_config(o);
  const auto rows = run_bench(c, [](const BenchRow& r) {
    std::cout << "seed " << r.seed << ' ' << r.label << " val_psnr " << r.val_psnr << '\n';
  });
  const std::string table = format_bench_table(rows);
  std::cout << table;
  if (!o.out.empty()) write_text(require_out(o) / "bench.txt", table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  load_defaults(o);

  CLI::App app{"Sub-band denoising network toolkit"};
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--data", o.data, "Dataset directory");
  app.add_option("--val", o.val, "Validation dataset directory");
  app.add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  app.add_option("--input", o.input, "Noisy Bayer plane (.sbt)");
  app.add_flag("--png", o.png, "Also write a demosaiced PNG preview");
  app.add_flag("--ensemble", o.ensemble, "Average over the 8 flip/rotation variants");
  app.add_option("--bottleneck", o.bottleneck, "sdwt, dwt or nodwt")->capture_default_str();
  app.add_option("--loss", o.loss, "l1 or topk")->capture_default_str();
  app.add_option("--optimizer", o.optimizer, "adam or radam")->capture_default_str();
  app.add_option("--blocks", o.blocks, "Bottleneck count")->capture_default_str();
  app.add_option("--filters", o.filters, "Feature channels")->capture_default_str();
  app.add_option("--dense-layers", o.dense_layers, "Layers per dense block")->capture_default_str();
  app.add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  app.add_option("--steps", o.steps, "Optimizer steps per epoch")->capture_default_str();
  app.add_option("--batch", o.batch, "Batch size")->capture_default_str();
  app.add_option("--patch", o.patch, "Bayer patch edge")->capture_default_str();
  app.add_option("--lr", o.lr, "Initial learning rate")->capture_default_str();
  app.add_option("--lr-drop-epoch", o.lr_drop_epoch, "Epoch of the learning-rate drop")->capture_default_str();
  app.add_option("--lr-drop-factor", o.lr_drop_factor, "Learning-rate divisor")->capture_default_str();
  app.add_option("--k-start", o.k_start, "Top-k percent at epoch 0")->capture_default_str();
  app.add_option("--k-min", o.k_min, "Top-k percent floor")->capture_default_str();
  app.add_option("--k-decay", o.k_decay, "Top-k percent decrease per epoch")->capture_default_str();
  app.add_option("--count", o.count, "Training pairs to generate")->capture_default_str();
  app.add_option("--val-count", o.val_count, "Validation pairs to generate")->capture_default_str();
  app.add_option("--size", o.size, "Generated image edge")->capture_default_str();
  app.add_option("--noise-a", o.noise_a, "Signal-dependent noise variance slope")->capture_default_str();
  app.add_option("--noise-b", o.noise_b, "Noise variance floor")->capture_default_str();
  app.add_option("--seeds", o.seeds, "Consecutive seeds for bench-bottlenecks")->capture_default_str();

  app.add_subcommand("gen-data", "Generate a synthetic Bayer dataset into --out");
  app.add_subcommand("train", "Train a model; writes metrics.csv and checkpoint.sbc into --out");
  app.add_subcommand("eval", "PSNR report for --checkpoint on --data");
  app.add_subcommand("denoise", "Denoise --input with --checkpoint into --out");
  app.add_subcommand("gradcheck", "Finite-difference gradient table");
  app.add_subcommand("bench-bottlenecks", "Compare bottleneck kinds and losses at parameter parity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  std::cout << "# sbnet " << sub << " seed=" << o.seed << '\n' << app.config_to_str(true, false) << std::flush;

  try {
    set_num_threads(o.threads);
    if (sub == "gen-data") return cmd_gen_data(o);
    if (sub == "train") return cmd_train(o);
    if (sub == "eval") return cmd_eval(o);
    if (sub == "denoise") return cmd_denoise(o);
    if (sub == "gradcheck") return cmd_gradcheck(o);
    return cmd_bench(o);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
