#include "trge/benchmark.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "trge/error.hpp"

namespace trge {

std::string to_string(StreamMode mode) { return mode == StreamMode::kMtil ? "mtil" : "mcil"; }

StreamMode parse_stream_mode(const std::string& text) {
  if (text == "mtil" || text == "MTIL") return StreamMode::kMtil;
  if (text == "mcil" || text == "MCIL") return StreamMode::kMcil;
  throw InvalidArgument("unknown stream mode '" + text + "' (expected mtil or mcil)");
}

namespace {

void validate(const StreamConfig& cfg) {
  if (cfg.tasks < 1) throw InvalidArgument("stream needs at least one task");
  if (cfg.classes_per_task < 2) throw InvalidArgument("classes_per_task must be at least 2");
  if (cfg.feature_dim == 0 || cfg.input_dim < cfg.feature_dim) {
    throw InvalidArgument("stream requires 0 < feature_dim <= input_dim");
  }
  if (cfg.train_samples == 0 || cfg.test_samples == 0) {
    throw InvalidArgument("train_samples and test_samples must be positive");
  }
  if (!(cfg.shift_strength >= 0.0)) throw InvalidArgument("shift_strength must be >= 0");
  if (!(cfg.class_overlap >= 0.0 && cfg.class_overlap < 1.0)) {
    throw InvalidArgument("class_overlap must lie in [0, 1)");
  }
  if (!(cfg.noise >= 0.0)) throw InvalidArgument("noise must be >= 0");
}

// Class sets per task. MCIL sets are disjoint; MTIL tasks reuse a fraction of
// the previous task's classes.
std::vector<std::vector<ClassId>> draw_class_sets(const StreamConfig& cfg, Rng& rng,
                                                  std::size_t& num_classes) {
  const std::size_t per_task = cfg.classes_per_task;
  std::size_t reuse = 0;
  if (cfg.mode == StreamMode::kMtil) {
    reuse = static_cast<std::size_t>(std::lround(cfg.class_overlap * static_cast<double>(per_task)));
    reuse = std::min(reuse, per_task - 1);
  }
  std::vector<std::vector<ClassId>> sets;
  ClassId next = 0;
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    std::vector<ClassId> classes;
    if (t > 0 && reuse > 0) {
      std::vector<ClassId> previous = sets.back();
      for (std::size_t r = 0; r < reuse; ++r) {
        const std::size_t pick = rng.uniform_index(previous.size());
        classes.push_back(previous[pick]);
        previous.erase(previous.begin() + static_cast<std::ptrdiff_t>(pick));
      }
    }
    while (classes.size() < per_task) classes.push_back(next++);
    std::sort(classes.begin(), classes.end());
    sets.push_back(std::move(classes));
  }
  num_classes = static_cast<std::size_t>(next);
  return sets;
}

Vector random_unit(std::size_t n, Rng& rng) {
  Vector v(n);
  for (double& x : v) x = rng.normal();
  v *= 1.0 / norm(v);
  return v;
}

// Product of Givens rotations over a random pairing of the coordinates.
Matrix random_rotation(std::size_t n, double angle_scale, Rng& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  Matrix r = Matrix::identity(n);
  for (std::size_t p = 0; p + 1 < n; p += 2) {
    const std::size_t a = perm[p];
    const std::size_t b = perm[p + 1];
    const double angle = angle_scale * rng.normal();
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t col = 0; col < n; ++col) {
      const double ra = r(a, col);
      const double rb = r(b, col);
      r(a, col) = c * ra - s * rb;
      r(b, col) = s * ra + c * rb;
    }
  }
  return r;
}

Vector apply_domain(const DomainTransform& domain, const Vector& clean) {
  Vector x = matvec(domain.rotation, clean);
  x *= domain.scale;
  x += domain.bias;
  return x;
}

double nearest_mean_accuracy(const FrozenBackbone& backbone, const TaskData& task) {
  std::map<ClassId, std::vector<Vector>> per_class;
  for (const Sample& s : task.train) per_class[s.label].push_back(backbone.embed(s.x));
  std::map<ClassId, Vector> means;
  for (const auto& [c, feats] : per_class) means.emplace(c, mean_feature(feats));
  std::size_t correct = 0;
  for (const Sample& s : task.test) {
    const Vector f = backbone.embed(s.x);
    ClassId best = means.begin()->first;
    double best_dist = euclidean(f, means.begin()->second);
    for (const auto& [c, m] : means) {
      const double dist = euclidean(f, m);
      if (dist < best_dist) {
        best = c;
        best_dist = dist;
      }
    }
    correct += best == s.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(task.test.size());
}

GeneratedBenchmark generate_attempt(const StreamConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Rng class_rng = rng.fork(1);
  std::size_t num_classes = 0;
  const auto class_sets = draw_class_sets(cfg, class_rng, num_classes);

  FrozenBackbone backbone =
      FrozenBackbone::random(cfg.input_dim, cfg.feature_dim, num_classes, mix_seed(seed, 2));
  const Matrix lift = transpose(backbone.projection());  // feature space → input space

  std::map<ClassId, Vector> anchors;
  for (const auto& [c, e] : backbone.class_embeddings()) {
    anchors.emplace(c, matvec(lift, cfg.anchor_gain * e));
  }

  Rng domain_rng = rng.fork(3);
  const Vector shared_offset = random_unit(cfg.feature_dim, domain_rng);
  const Matrix shared_rotation = random_rotation(
      cfg.input_dim, cfg.shift_strength * cfg.rotation * cfg.shared_shift, domain_rng);
  const std::size_t families = cfg.domain_families == 0 ? cfg.tasks : cfg.domain_families;
  std::vector<Vector> family_offsets;
  std::vector<Matrix> family_rotations;
  for (std::size_t f = 0; f < families; ++f) {
    family_offsets.push_back(random_unit(cfg.feature_dim, domain_rng));
    family_rotations.push_back(matmul(
        random_rotation(cfg.input_dim,
                        cfg.shift_strength * cfg.rotation * cfg.domain_separation, domain_rng),
        shared_rotation));
  }

  TaskStream stream;
  stream.mode = cfg.mode;
  for (std::size_t c = 0; c < num_classes; ++c) {
    stream.class_names.emplace(static_cast<ClassId>(c), "class_" + std::to_string(c));
  }

  Rng sample_rng = rng.fork(4);
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    TaskData task;
    task.index = static_cast<int>(t + 1);
    task.class_ids = class_sets[t];
    const std::size_t family = t % families;

    Vector offset = cfg.shared_shift * shared_offset;
    offset += cfg.domain_separation * family_offsets[family];
    offset += cfg.task_jitter * random_unit(cfg.feature_dim, domain_rng);
    offset *= cfg.shift_strength;
    task.domain.rotation = matmul(
        random_rotation(cfg.input_dim, cfg.shift_strength * cfg.rotation * cfg.task_jitter,
                        domain_rng),
        family_rotations[family]);
    task.domain.scale = 1.0 + 0.25 * cfg.shift_strength * domain_rng.uniform(-1.0, 1.0);
    task.domain.bias = matvec(lift, offset);

    auto draw = [&](std::size_t count, std::vector<Sample>& out) {
      out.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        const ClassId label = task.class_ids[i % task.class_ids.size()];
        Vector clean = anchors.at(label);
        for (double& v : clean) v += cfg.noise * sample_rng.normal();
        out.push_back(Sample{apply_domain(task.domain, clean), label, task.index});
      }
    };
    draw(cfg.train_samples, task.train);
    draw(cfg.test_samples, task.test);
    stream.tasks.push_back(std::move(task));
  }
  return GeneratedBenchmark{std::move(stream), std::move(backbone)};
}

}  // namespace

double zero_shot_accuracy(const FrozenBackbone& backbone, const TaskData& task) {
  std::size_t correct = 0;
  for (const Sample& s : task.test) {
    correct += backbone.classify(backbone.embed(s.x), task.class_ids).prediction() == s.label;
  }
  return static_cast<double>(correct) / static_cast<double>(task.test.size());
}

GeneratedBenchmark generate_stream(const StreamConfig& cfg) {
  validate(cfg);
  const std::size_t attempts = std::max<std::size_t>(1, cfg.max_retries);
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    GeneratedBenchmark out = generate_attempt(cfg, mix_seed(cfg.seed, 1000 + attempt));
    bool ok = true;
    for (const TaskData& task : out.stream.tasks) {
      const double chance = 1.0 / static_cast<double>(task.class_ids.size());
      const double zero_shot = zero_shot_accuracy(out.backbone, task);
      const double fitted = nearest_mean_accuracy(out.backbone, task);
      if (!(zero_shot > chance) || (cfg.shift_strength > 0.0 && !(zero_shot < fitted))) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out.stream.attempts = attempt + 1;
      return out;
    }
    spdlog::debug("stream attempt {} failed quality checks, retrying", attempt + 1);
  }
  std::ostringstream msg;
  msg << "no stream passed the zero-shot checks in " << attempts
      << " attempts (tasks=" << cfg.tasks << ", classes_per_task=" << cfg.classes_per_task
      << ", shift_strength=" << cfg.shift_strength << ", noise=" << cfg.noise
      << ", seed=" << cfg.seed << ")";
  throw GenerationInfeasible(msg.str());
}

std::vector<ClassId> evaluation_candidates(const TaskStream& stream, std::size_t eval_task,
                                           std::size_t tasks_learned) {
  if (eval_task < 1 || eval_task > stream.tasks.size()) {
    throw InvalidArgument("evaluation task out of range");
  }
  const auto& own = stream.tasks[eval_task - 1].class_ids;
  if (stream.mode == StreamMode::kMtil) return own;
  std::set<ClassId> classes;
  for (std::size_t t = 0; t < tasks_learned && t < stream.tasks.size(); ++t) {
    classes.insert(stream.tasks[t].class_ids.begin(), stream.tasks[t].class_ids.end());
  }
  if (eval_task > tasks_learned) classes.insert(own.begin(), own.end());
  return {classes.begin(), classes.end()};
}

std::vector<ClassId> training_candidates(const TaskStream& stream, std::size_t task) {
  return evaluation_candidates(stream, task, task);
}

std::size_t AccuracyMatrix::index(std::size_t after, std::size_t task) const {
  if (after > tasks_ || task < 1 || task > tasks_) {
    throw InvalidArgument("accuracy matrix index out of range");
  }
  return after * tasks_ + (task - 1);
}

double AccuracyMatrix::at(std::size_t after, std::size_t task) const {
  const std::size_t i = index(after, task);
  if (!filled_[i]) throw InvalidArgument("accuracy matrix entry not populated");
  return values_[i];
}

void AccuracyMatrix::set(std::size_t after, std::size_t task, double value) {
  const std::size_t i = index(after, task);
  values_[i] = value;
  filled_[i] = true;
}

bool AccuracyMatrix::populated() const {
  return tasks_ > 0 && std::all_of(filled_.begin(), filled_.end(), [](bool b) { return b; });
}

bool AccuracyMatrix::row_populated(std::size_t after) const {
  if (after > tasks_) return false;
  for (std::size_t j = 1; j <= tasks_; ++j)
    if (!filled_[index(after, j)]) return false;
  return true;
}

void AccuracyMatrix::set_row(std::size_t after, const std::vector<double>& row) {
  if (row.size() != tasks_) throw InvalidArgument("accuracy row has wrong length");
  for (std::size_t j = 0; j < tasks_; ++j) set(after, j + 1, row[j]);
}

std::vector<double> AccuracyMatrix::row(std::size_t after) const {
  std::vector<double> out;
  for (std::size_t j = 1; j <= tasks_; ++j) out.push_back(at(after, j));
  return out;
}

namespace {

// Shortest decimal text that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::string AccuracyMatrix::to_csv() const {
  std::ostringstream out;
  out << "after";
  for (std::size_t j = 1; j <= tasks_; ++j) out << ",task" << j;
  out << '\n';
  for (std::size_t i = 0; i <= tasks_; ++i) {
    out << i;
    for (std::size_t j = 1; j <= tasks_; ++j) out << ',' << shortest(at(i, j));
    out << '\n';
  }
  return out.str();
}

MetricsReport metrics(const AccuracyMatrix& a) {
  if (!a.populated()) throw InvalidArgument("metrics: accuracy matrix is not fully populated");
  const std::size_t T = a.tasks();
  MetricsReport r;
  double transfer_sum = 0.0;
  std::size_t transfer_count = 0;
  for (std::size_t j = 1; j <= T; ++j) {
    if (j >= 2) {
      double sum = 0.0;
      for (std::size_t i = 0; i < j; ++i) sum += a.at(i, j);
      const double value = sum / static_cast<double>(j);
      r.transfer.emplace_back(value);
      transfer_sum += value;
      ++transfer_count;
    } else {
      r.transfer.emplace_back(std::nullopt);
    }
    double sum = 0.0;
    for (std::size_t i = 1; i <= T; ++i) sum += a.at(i, j);
    r.average.push_back(sum / static_cast<double>(T));
    r.last.push_back(a.at(T, j));
  }
  const double n = static_cast<double>(T);
  r.mean_transfer = transfer_count > 0 ? transfer_sum / static_cast<double>(transfer_count) : 0.0;
  double avg = 0.0;
  double last = 0.0;
  for (std::size_t j = 0; j < T; ++j) {
    avg += r.average[j];
    last += r.last[j];
  }
  r.mean_average = avg / n;
  r.mean_last = last / n;
  return r;
}

void fill_recognition_metrics(MetricsReport& report, const std::vector<RecognitionRecord>& log,
                              std::size_t tasks) {
  std::vector<std::size_t> hits(tasks, 0);
  std::vector<std::size_t> totals(tasks, 0);
  std::size_t unseen_hits = 0;
  std::size_t unseen_total = 0;
  for (const RecognitionRecord& r : log) {
    if (r.task < 1 || r.task > tasks) continue;
    if (r.after == tasks) {
      ++totals[r.task - 1];
      hits[r.task - 1] += r.predicted == r.truth ? 1 : 0;
    }
    if (r.after >= 1 && r.task > r.after) {
      ++unseen_total;
      unseen_hits += r.predicted.is_unseen() ? 1 : 0;
    }
  }
  report.recognizer_accuracy.assign(tasks, 0.0);
  for (std::size_t j = 0; j < tasks; ++j) {
    if (totals[j] > 0) {
      report.recognizer_accuracy[j] =
          static_cast<double>(hits[j]) / static_cast<double>(totals[j]);
    }
  }
  if (unseen_total > 0) {
    report.unseen_detection_accuracy =
        static_cast<double>(unseen_hits) / static_cast<double>(unseen_total);
  } else {
    report.unseen_detection_accuracy.reset();
  }
}

std::vector<double> evaluate(const TrgeAdapter& adapter, const FrozenBackbone& backbone,
                             const TaskStream& stream, std::size_t after, Recognizer& recognizer,
                             const RoutingConfig& routing, const EvaluationHooks& hooks) {
  if (adapter.tasks_learned() != after) {
    throw InvalidArgument("evaluate: adapter has learned " +
                          std::to_string(adapter.tasks_learned()) + " tasks, row is " +
                          std::to_string(after));
  }
  std::vector<double> row;
  row.reserve(stream.tasks.size());
  for (std::size_t j = 1; j <= stream.tasks.size(); ++j) {
    const TaskData& task = stream.tasks[j - 1];
    const std::vector<ClassId> candidates = evaluation_candidates(stream, j, after);
    std::size_t correct = 0;
    for (const Sample& sample : task.test) {
      const Vector y_pre = backbone.embed(sample.x);
      const TaskId id = recognizer.recognize(sample, y_pre, after);
      const AdapterOutput out = adapter.forward(y_pre, id, routing);
      correct += backbone.classify(out.y_out, candidates).prediction() == sample.label ? 1 : 0;

      if (hooks.frequency != nullptr && !out.decision.weights.empty()) {
        hooks.frequency->record(out.decision, j - 1);
      }
      if (hooks.recognition != nullptr) {
        hooks.recognition->push_back(
            RecognitionRecord{after, j, recognize_oracle(sample, after), id});
      }
      if (hooks.on_decision) hooks.on_decision(j, out);
    }
    row.push_back(static_cast<double>(correct) / static_cast<double>(task.test.size()));
  }
  return row;
}

}  // namespace trge
