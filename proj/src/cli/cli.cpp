#include "m3dseg/cli/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "m3dseg/evaluation/evaluation.hpp"
#include "m3dseg/io/checkpoint.hpp"
#include "m3dseg/io/config.hpp"
#include "m3dseg/io/ply.hpp"

namespace m3dseg::cli {

namespace {

namespace fs = std::filesystem;
using geometry::Dataset;
using geometry::ShapeRecord;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<const ShapeRecord*> category_records(const Dataset& d, const std::string& category, const fs::path& dir) {
  auto records = d.select(category);
  if (records.empty()) throw ValidationError("dataset '" + dir.string() + "' has no shapes of category '" + category + "'");
  return records;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "'");
  }
}

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_filename(path.stem().string() + suffix + path.extension().string());
  return out;
}

struct GenDataArgs {
  std::string out, categories, split = "train";
  std::size_t per_category = 8;
  std::uint64_t seed = 0;
  std::uint32_t resolution = 16;
  std::uint32_t points = geometry::kDefaultPointCount;
};

void gen_data(const GenDataArgs& a) {
  std::vector<geometry::Category> cats;
  for (const std::string& name : split_list(a.categories)) {
    try {
      cats.push_back(geometry::parse_category(name));
    } catch (const geometry::GeometryError& e) {
      throw ValidationError(e.what());
    }
  }
  if (cats.empty()) throw ValidationError("--categories is empty");
  if (a.per_category == 0) throw ValidationError("--per-category must be positive");
  if (a.resolution < 2) throw ValidationError("--resolution must be >= 2");
  if (a.points == 0) throw ValidationError("--points must be positive");
  if (a.split != "train" && a.split != "test") throw ValidationError("--split must be train or test");
  Dataset d;
  for (auto c : cats)
    for (auto& r : geometry::generate_records(c, a.per_category, a.seed, a.split, a.resolution, a.points))
      d.records.push_back(std::move(r));
  geometry::save_dataset(d, a.out);
  std::cout << "wrote " << d.records.size() << " shapes to " << a.out << "\n";
}

struct ImportArgs {
  std::vector<std::string> files;
  std::string out, category, parts, split = "test";
  std::uint32_t resolution = 16;
};

void import_points(const ImportArgs& a) {
  const auto parts = split_list(a.parts);
  if (parts.empty()) throw ValidationError("--parts is empty");
  Dataset d;
  for (const std::string& f : a.files) {
    geometry::PointCloud cloud = geometry::import_text_points(f);
    d.records.push_back(geometry::import_record(std::move(cloud), fs::path(f).stem().string(), a.category, parts,
                                                a.split, a.resolution));
  }
  d.validate();
  geometry::save_dataset(d, a.out);
  std::cout << "imported " << d.records.size() << " shapes to " << a.out << "\n";
}

struct MetaTrainArgs {
  std::string data, config, out, report, setting;
};

void meta_train(const MetaTrainArgs& a) {
  io::RunConfig rc = io::load_run_config(a.config);
  const std::string setting_name = a.setting.empty() ? rc.setting : a.setting;
  const training::Setting setting = training::parse_setting(setting_name);
  const Dataset d = geometry::load_dataset(a.data);
  const auto records = d.select("", "train");
  if (records.empty()) throw ValidationError("dataset '" + a.data + "' has no training shapes");
  std::size_t max_parts = 0;
  for (const auto* r : records) max_parts = std::max(max_parts, r->part_count());
  rc.architecture.validate(max_parts);
  const auto tasks = training::make_tasks(records, rc.architecture);

  io::Checkpoint ckpt;
  training::TrainReport report;
  if (setting == training::Setting::A) {
    numerics::ParameterSet params = training::init_pretrain_params(rc.architecture, rc.train.seed);
    report = training::pretrain_learner(params, rc.architecture, tasks, rc.train);
    ckpt = io::pretrain_checkpoint(params, rc.architecture, rc.train, d.digest());
  } else {
    auto meta = metalearner::init_meta_params(
        rc.architecture, setting == training::Setting::B ? metalearner::Variant::deterministic : metalearner::Variant::vae,
        rc.train.seed);
    report = training::meta_train(meta, tasks, rc.train);
    ckpt = io::meta_checkpoint(meta, rc.train, d.digest());
  }
  const io::Bytes bytes = io::encode_checkpoint(ckpt);
  report.checkpoint_digest = io::hex64(numerics::fnv1a64(bytes.data(), bytes.size()));
  ensure_parent(a.out);
  io::write_file(a.out, bytes);
  const std::string report_path = a.report.empty() ? a.out + ".report.jsonl" : a.report;
  io::write_text(report_path, report.json_lines());
  std::cout << "meta-train: final loss " << report.final_loss << ", checkpoint " << a.out << " (" << report.checkpoint_digest
            << ")\n";
}

struct FineTuneArgs {
  std::string meta, data, category, config, out, train_data, ablation_csv, report;
  std::vector<std::string> settings;
};

void fine_tune(const FineTuneArgs& a) {
  io::RunConfig rc = io::load_run_config(a.config);
  const Dataset d = geometry::load_dataset(a.data);
  const auto targets = category_records(d, a.category, a.data);

  if (!a.settings.empty()) {
    std::vector<training::Setting> settings;
    for (const std::string& s : a.settings)
      for (const std::string& part : split_list(s)) settings.push_back(training::parse_setting(part));
    const std::string train_dir = !a.train_data.empty() ? a.train_data : rc.train_data.value_or("");
    if (train_dir.empty()) throw ValidationError("--setting needs --train-data or train_data in the config");
    const Dataset train = geometry::load_dataset(train_dir);
    const auto train_records = train.select("", "train");
    if (train_records.empty()) throw ValidationError("dataset '" + train_dir + "' has no training shapes");
    std::vector<evaluation::AblationRow> rows;
    for (auto s : settings) {
      const training::SettingRun run = training::run_weight_setting(s, train_records, targets, rc.architecture, rc.train);
      const auto score = evaluation::evaluate_records(run.model, targets, geometry::kDefaultPointCount);
      rows.push_back({training::setting_name(s), score.mean_iou, score.accuracy});
      const fs::path out = settings.size() == 1 ? fs::path(a.out) : with_suffix(a.out, "_" + training::setting_name(s));
      ensure_parent(out);
      io::save_checkpoint(io::learner_checkpoint(run.model, rc.train, d.digest(), training::setting_name(s)), out);
      std::cout << "setting " << training::setting_name(s) << ": mIoU " << score.mean_iou << ", accuracy "
                << score.accuracy << "\n";
    }
    const std::string csv = evaluation::ablation_csv(rows);
    if (!a.ablation_csv.empty()) {
      ensure_parent(a.ablation_csv);
      io::write_text(a.ablation_csv, csv);
    }
    std::cout << csv;
    return;
  }

  if (a.meta.empty()) throw ValidationError("fine-tune needs --meta or --setting");
  const io::Checkpoint ckpt = io::load_checkpoint(a.meta);
  io::require_same_architecture(rc.architecture, ckpt.architecture);
  training::TrainReport report;
  training::LearnerModel model;
  std::string setting;
  if (ckpt.kind == "pretrain") {
    model = training::fine_tune_pretrained(ckpt.tensors, ckpt.architecture, targets, rc.train, &report);
    setting = "A";
  } else {
    const metalearner::MetaParams meta = io::meta_from_checkpoint(ckpt);
    model = training::fine_tune_meta(meta, targets, rc.train, &report);
    setting = meta.variant == metalearner::Variant::vae ? "C" : "B";
  }
  ensure_parent(a.out);
  io::save_checkpoint(io::learner_checkpoint(model, rc.train, d.digest(), setting), a.out);
  io::write_text(a.report.empty() ? a.out + ".report.jsonl" : a.report, report.json_lines());
  std::cout << "fine-tune: final loss " << report.final_loss << ", checkpoint " << a.out << "\n";
}

training::LearnerModel load_model(const std::string& path) { return io::learner_from_checkpoint(io::load_checkpoint(path)); }

std::vector<std::string> categories_of(const Dataset& d, const std::string& filter) {
  std::vector<std::string> cats;
  for (const auto& r : d.records)
    if ((filter.empty() || r.category == filter) && std::find(cats.begin(), cats.end(), r.category) == cats.end())
      cats.push_back(r.category);
  if (cats.empty()) throw ValidationError("no shapes to evaluate");
  return cats;
}

struct SegmentArgs {
  std::string model, data, out, category;
  std::size_t points = geometry::kDefaultPointCount;
};

void segment(const SegmentArgs& a) {
  const training::LearnerModel model = load_model(a.model);
  const Dataset d = geometry::load_dataset(a.data);
  const learner::PredictorLayout layout(model.config);
  std::vector<std::pair<std::string, std::string>> outputs;
  for (const std::string& cat : categories_of(d, a.category)) {
    const auto records = d.select(cat);
    const auto score = evaluation::evaluate_records(model, records, a.points);
    for (const auto* r : records) {
      const std::size_t idx = model.index_of(r->id);
      const auto pts = r->cloud.prefix(std::min(a.points, r->cloud.size()));
      const auto seg = learner::segment_points(model.embeddings[idx], pts.points, model.weights(idx), layout);
      std::string text = "# branch part occupancy\n";
      char line[96];
      for (std::size_t i = 0; i < seg.labels.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu %zu %.9g\n", seg.labels[i], score.assignment.mapping[seg.labels[i]],
                      seg.occupancies[i]);
        text += line;
      }
      outputs.emplace_back(r->id + ".labels", std::move(text));
    }
  }
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create directory '" + a.out + "'");
  for (const auto& [name, text] : outputs) io::write_text(fs::path(a.out) / name, text);
  std::cout << "segmented " << outputs.size() << " shapes into " << a.out << "\n";
}

/// First column of a `segment` label file.
std::vector<std::size_t> read_branch_file(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::vector<std::size_t> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    long v;
    if (!(ls >> v) || v < 0) throw ValidationError(path.string() + ": malformed label line");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

struct EvalArgs {
  std::string model, data, out, json, predictions, category, sweep_out;
  std::size_t points = geometry::kDefaultPointCount;
  std::vector<std::size_t> sweep;
  std::uint64_t seed = 0;
};

void eval(const EvalArgs& a) {
  if (a.model.empty() == a.predictions.empty()) throw ValidationError("eval needs exactly one of --model or --predictions");
  const Dataset d = geometry::load_dataset(a.data);
  std::vector<evaluation::CategoryScore> scores;
  std::vector<evaluation::SweepResult> sweeps;
  std::optional<training::LearnerModel> model;
  if (!a.model.empty()) model = load_model(a.model);
  for (const std::string& cat : categories_of(d, a.category)) {
    const auto records = d.select(cat);
    if (model) {
      scores.push_back(evaluation::evaluate_records(*model, records, a.points));
      if (!a.sweep.empty()) sweeps.push_back(evaluation::point_count_sweep(*model, records, a.sweep, a.seed));
      continue;
    }
    std::vector<std::size_t> branches, labels;
    std::vector<std::vector<std::size_t>> per_shape;
    std::size_t max_branch = 0;
    for (const auto* r : records) {
      auto b = read_branch_file(fs::path(a.predictions) / (r->id + ".labels"));
      if (b.size() > r->cloud.size())
        throw ValidationError("predictions for '" + r->id + "' have more points than the cloud");
      for (auto v : b) max_branch = std::max(max_branch, v);
      branches.insert(branches.end(), b.begin(), b.end());
      labels.insert(labels.end(), r->cloud.labels.begin(), r->cloud.labels.begin() + static_cast<std::ptrdiff_t>(b.size()));
      per_shape.push_back(std::move(b));
    }
    evaluation::CategoryScore s;
    s.category = cat;
    s.n_shapes = records.size();
    s.n_points = labels.size();
    s.assignment = evaluation::fit_branch_assignment(branches, labels, max_branch + 1, records.front()->part_count());
    for (std::size_t i = 0; i < records.size(); ++i) {
      const std::vector<std::size_t> gt(records[i]->cloud.labels.begin(),
                                        records[i]->cloud.labels.begin() + static_cast<std::ptrdiff_t>(per_shape[i].size()));
      s.shapes.push_back(evaluation::compute_iou(s.assignment.apply(per_shape[i]), gt, records[i]->part_count()));
    }
    s.mean_iou = evaluation::category_miou(s.shapes);
    s.accuracy = evaluation::compute_iou(s.assignment.apply(branches), labels, records.front()->part_count()).accuracy;
    scores.push_back(std::move(s));
  }
  ensure_parent(a.out);
  io::write_text(a.out, evaluation::scores_csv(scores));
  if (!a.json.empty()) {
    ensure_parent(a.json);
    io::write_text(a.json, evaluation::scores_json(scores));
  }
  if (!sweeps.empty()) {
    const std::string path = a.sweep_out.empty() ? a.out + ".sweep.csv" : a.sweep_out;
    io::write_text(path, evaluation::sweep_csv(sweeps));
  }
  std::cout << evaluation::scores_csv(scores);
}

struct ExportArgs {
  std::string data, id, out, model;
  std::size_t points = geometry::kDefaultPointCount;
};

void export_ply(const ExportArgs& a) {
  const Dataset d = geometry::load_dataset(a.data);
  const ShapeRecord* record = nullptr;
  for (const auto& r : d.records)
    if (r.id == a.id) record = &r;
  if (!record) throw ValidationError("dataset '" + a.data + "' has no shape '" + a.id + "'");
  const auto pts = record->cloud.prefix(std::min(a.points, record->cloud.size()));
  std::vector<std::size_t> labels(pts.labels.begin(), pts.labels.end());
  if (!a.model.empty()) {
    const training::LearnerModel model = load_model(a.model);
    const auto score = evaluation::evaluate_records(model, d.select(record->category), a.points);
    const std::size_t idx = model.index_of(record->id);
    const auto seg = learner::segment_points(model.embeddings[idx], pts.points, model.weights(idx),
                                             learner::PredictorLayout(model.config));
    labels = score.assignment.apply(seg.labels);
  }
  const std::string text = io::ply_text(pts.points, labels);
  ensure_parent(a.out);
  io::write_text(a.out, text);
  std::cout << "wrote " << pts.size() << " vertices to " << a.out << "\n";
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Meta-learned part segmentation of voxelized 3D shapes"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic labeled dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--categories", gen.categories, "Comma-separated: table,chair,mug,airplane_toy")->required();
  gen_cmd->add_option("--per-category", gen.per_category, "Shapes per category");
  gen_cmd->add_option("--seed", gen.seed, "Master seed");
  gen_cmd->add_option("--resolution", gen.resolution, "Occupancy grid resolution");
  gen_cmd->add_option("--split", gen.split, "train or test");
  gen_cmd->add_option("--points", gen.points, "Surface points per shape");

  ImportArgs imp;
  auto* imp_cmd = app.add_subcommand("import-points", "Import 'x y z label' text files as a dataset");
  imp_cmd->add_option("files", imp.files, "Text point files")->required();
  imp_cmd->add_option("--out", imp.out, "Output directory")->required();
  imp_cmd->add_option("--category", imp.category, "Category name")->required();
  imp_cmd->add_option("--parts", imp.parts, "Comma-separated part names")->required();
  imp_cmd->add_option("--split", imp.split, "train or test");
  imp_cmd->add_option("--resolution", imp.resolution, "Occupancy grid resolution");

  MetaTrainArgs mt;
  auto* mt_cmd = app.add_subcommand("meta-train", "Train the meta-learner on a dataset");
  mt_cmd->add_option("--data", mt.data, "Dataset directory")->required();
  mt_cmd->add_option("--config", mt.config, "Run config JSON")->required();
  mt_cmd->add_option("--out", mt.out, "Checkpoint path")->required();
  mt_cmd->add_option("--report", mt.report, "JSON-lines report path (default <out>.report.jsonl)");
  mt_cmd->add_option("--setting", mt.setting, "A, B or C (default from config)");

  FineTuneArgs ft;
  auto* ft_cmd = app.add_subcommand("fine-tune", "Fine-tune the learner on a target category");
  ft_cmd->add_option("--meta", ft.meta, "Meta or pretrain checkpoint");
  ft_cmd->add_option("--data", ft.data, "Target dataset directory")->required();
  ft_cmd->add_option("--category", ft.category, "Target category")->required();
  ft_cmd->add_option("--config", ft.config, "Run config JSON")->required();
  ft_cmd->add_option("--out", ft.out, "Learner checkpoint path")->required();
  ft_cmd->add_option("--setting", ft.settings, "Run weight settings end to end (A, B, C; repeatable or comma-separated)");
  ft_cmd->add_option("--train-data", ft.train_data, "Training dataset for --setting");
  ft_cmd->add_option("--ablation-csv", ft.ablation_csv, "Write setting,iou,acc here");
  ft_cmd->add_option("--report", ft.report, "JSON-lines report path");

  SegmentArgs seg;
  auto* seg_cmd = app.add_subcommand("segment", "Write per-shape branch and part labels");
  seg_cmd->add_option("--model", seg.model, "Learner checkpoint")->required();
  seg_cmd->add_option("--data", seg.data, "Dataset directory")->required();
  seg_cmd->add_option("--out", seg.out, "Output directory")->required();
  seg_cmd->add_option("--category", seg.category, "Only this category");
  seg_cmd->add_option("--points", seg.points, "Points per shape");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Score segmentations");
  ev_cmd->add_option("--model", ev.model, "Learner checkpoint");
  ev_cmd->add_option("--predictions", ev.predictions, "Directory of <id>.labels files instead of a model");
  ev_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  ev_cmd->add_option("--out", ev.out, "Score CSV path")->required();
  ev_cmd->add_option("--json", ev.json, "Score JSON path");
  ev_cmd->add_option("--category", ev.category, "Only this category");
  ev_cmd->add_option("--points", ev.points, "Points per shape");
  ev_cmd->add_option("--sweep", ev.sweep, "Point counts for the robustness sweep")->delimiter(',');
  ev_cmd->add_option("--sweep-out", ev.sweep_out, "Sweep CSV path (default <out>.sweep.csv)");
  ev_cmd->add_option("--seed", ev.seed, "Resampling seed for the sweep");

  ExportArgs ex;
  auto* ex_cmd = app.add_subcommand("export-ply", "Export a colored point cloud");
  ex_cmd->add_option("--data", ex.data, "Dataset directory")->required();
  ex_cmd->add_option("--id", ex.id, "Shape id")->required();
  ex_cmd->add_option("--out", ex.out, "PLY path")->required();
  ex_cmd->add_option("--model", ex.model, "Color by predicted parts from this learner checkpoint");
  ex_cmd->add_option("--points", ex.points, "Points to export");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*gen_cmd) gen_data(gen);
    else if (*imp_cmd) import_points(imp);
    else if (*mt_cmd) meta_train(mt);
    else if (*ft_cmd) fine_tune(ft);
    else if (*seg_cmd) segment(seg);
    else if (*ev_cmd) eval(ev);
    else if (*ex_cmd) export_ply(ex);
    return kOk;
  } catch (const training::DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const geometry::GeometryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const numerics::NumericsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"m3dseg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace m3dseg::cli
