#include "snsld/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "snsld/error.hpp"
#include "snsld/hash.hpp"

namespace snsld {

using json = nlohmann::json;

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

std::string hash_file(const fs::path& path) { return to_hex(fnv1a(read_text(path))); }

namespace {

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

template <class T>
T field(const json& doc, const char* key, const char* what) {
  if (!doc.contains(key)) throw ConfigError(std::string(what) + ": missing field '" + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(what) + ": field '" + key + "' has the wrong type");
  }
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string model_document(const GalerkinModel& model) {
  json doc;
  doc["format"] = "snsld-model";
  doc["n_modes"] = model.n_modes();
  doc["eigenvalues"] = vec(model.eigenvalues());
  doc["noise_amps"] = vec(model.noise_amps());
  doc["forcing"] = vec(model.forcing());
  json t = json::array();
  for (const auto& e : model.tensor()) t.push_back(json::array({e.i, e.j, e.k, e.value}));
  doc["tensor"] = t;
  json m = json::array();
  for (const auto& l : model.index_map()) m.push_back({{"kx", l.kx}, {"ky", l.ky}, {"basis", l.sine ? "sin" : "cos"}});
  doc["index_map"] = m;
  doc["model_id"] = to_hex(model.id());
  return doc.dump(1) + "\n";
}

GalerkinModel parse_model(const std::string& text, bool validate) {
  const char* what = "model document";
  json doc = parse_json(text, what);
  auto ev = field<std::vector<double>>(doc, "eigenvalues", what);
  auto noise = field<std::vector<double>>(doc, "noise_amps", what);
  auto forcing = field<std::vector<double>>(doc, "forcing", what);
  int n = field<int>(doc, "n_modes", what);
  if (n != static_cast<int>(ev.size())) throw ConfigError("model document: n_modes disagrees with eigenvalues");
  std::vector<TensorEntry> tensor;
  for (const auto& e : field<json>(doc, "tensor", what)) {
    if (!e.is_array() || e.size() != 4) throw ConfigError("model document: tensor entries must be [i, j, k, value]");
    tensor.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>(), e[3].get<double>()});
  }
  std::vector<ModeLabel> labels;
  if (doc.contains("index_map")) {
    for (const auto& l : doc["index_map"]) {
      labels.push_back({field<int>(l, "kx", what), field<int>(l, "ky", what), field<std::string>(l, "basis", what) == "sin"});
    }
  }
  if (validate) return GalerkinModel::build_custom(ev, tensor, forcing, noise, labels);
  return GalerkinModel::build_unchecked(ev, tensor, forcing, noise, labels);
}

void save_model(const fs::path& path, const GalerkinModel& model) { write_text(path, model_document(model)); }

GalerkinModel load_model(const fs::path& path, bool validate) { return parse_model(read_text(path), validate); }

std::string chain_document(const FiniteChain& chain) {
  json doc;
  doc["format"] = "snsld-chain";
  doc["clocking"] = chain.clocking() == Clocking::discrete ? "discrete" : "continuous";
  doc["n_states"] = chain.size();
  json rows = json::array();
  for (int i = 0; i < chain.size(); ++i) rows.push_back(vec(chain.matrix().row(i).transpose()));
  doc["rows"] = rows;
  doc["labels"] = chain.labels();
  return doc.dump(1) + "\n";
}

FiniteChain parse_chain(const std::string& text) {
  const char* what = "chain document";
  json doc = parse_json(text, what);
  auto clock = field<std::string>(doc, "clocking", what);
  int n = field<int>(doc, "n_states", what);
  auto rows = field<std::vector<std::vector<double>>>(doc, "rows", what);
  if (n <= 0 || static_cast<int>(rows.size()) != n) throw ConfigError("chain document: n_states disagrees with rows");
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != n) throw ConfigError("chain document: row " + std::to_string(i) + " has the wrong length");
    for (int j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  std::vector<std::string> labels;
  if (doc.contains("labels")) labels = field<std::vector<std::string>>(doc, "labels", what);
  if (clock == "discrete") return FiniteChain::discrete(m, labels);
  if (clock == "continuous") return FiniteChain::continuous(m, labels);
  throw ConfigError("chain document: clocking must be 'discrete' or 'continuous'");
}

std::string potential_document(const Potential& v) {
  json doc;
  doc["format"] = "snsld-potential";
  doc["level"] = v.level();
  doc["window"] = v.window();
  doc["dt"] = v.dt();
  doc["constant"] = v.constant_term();
  doc["bound"] = v.bound();
  json f = json::array();
  for (const auto& ft : v.features()) f.push_back({{"weight", ft.weight}, {"direction", ft.direction}, {"offset", ft.offset}});
  doc["features"] = f;
  return doc.dump(1) + "\n";
}

Potential parse_potential(const std::string& text) {
  const char* what = "potential document";
  json doc = parse_json(text, what);
  std::vector<TanhFeature> feats;
  if (doc.contains("features")) {
    for (const auto& f : doc["features"]) {
      feats.push_back({field<double>(f, "weight", what), field<std::vector<double>>(f, "direction", what),
                       field<double>(f, "offset", what)});
    }
  }
  double window = doc.value("window", 0.0);
  double dt = doc.value("dt", 0.0);
  return Potential(field<int>(doc, "level", what), field<double>(doc, "constant", what), std::move(feats), window, dt);
}

namespace {

const char* space_tag(SpaceKind s) {
  switch (s) {
    case SpaceKind::state:
      return "state";
    case SpaceKind::window:
      return "window";
    case SpaceKind::label:
      return "label";
  }
  return "?";
}

}  // namespace

std::string measure_document(const EmpiricalMeasure& mu) {
  json doc;
  doc["format"] = "snsld-measure";
  doc["space"] = space_tag(mu.space());
  doc["n_modes"] = mu.n_modes();
  doc["window_points"] = mu.window_points();
  doc["dt"] = mu.dt();
  if (mu.space() == SpaceKind::window) doc["metric_note"] = kWindowMetricNote;
  json atoms = json::array();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto p = mu.point(i);
    atoms.push_back({{"weight", mu.weight(i)}, {"point", std::vector<double>(p.begin(), p.end())}});
  }
  doc["atoms"] = atoms;
  return doc.dump(1) + "\n";
}

EmpiricalMeasure parse_measure(const std::string& text) {
  const char* what = "measure document";
  json doc = parse_json(text, what);
  auto tag = field<std::string>(doc, "space", what);
  SpaceKind space;
  if (tag == "state") {
    space = SpaceKind::state;
  } else if (tag == "window") {
    space = SpaceKind::window;
  } else if (tag == "label") {
    space = SpaceKind::label;
  } else {
    throw ConfigError("measure document: unknown space '" + tag + "'");
  }
  EmpiricalMeasure mu(space, field<int>(doc, "n_modes", what), field<std::size_t>(doc, "window_points", what),
                      field<double>(doc, "dt", what));
  for (const auto& a : field<json>(doc, "atoms", what)) {
    auto p = field<std::vector<double>>(a, "point", what);
    mu.add_atom(p, field<double>(a, "weight", what));
  }
  if (mu.size() == 0) throw ConfigError("measure document: empty support");
  return mu;
}

std::string pf_document(const PFData& pf) {
  json doc;
  doc["format"] = "snsld-pfdata";
  doc["c"] = pf.c;
  doc["log_c"] = pf.log_c;
  doc["h"] = vec(pf.h);
  doc["mu"] = vec(pf.mu);
  doc["iterations"] = pf.iterations;
  doc["residual"] = pf.residual;
  doc["converged"] = pf.converged;
  return doc.dump(1) + "\n";
}

namespace {

constexpr char kMagic[8] = {'S', 'N', 'S', 'L', 'D', 'T', 'R', 'J'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const fs::path& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("truncated trajectory file " + path.string());
  return v;
}

}  // namespace

void save_trajectory(const fs::path& path, const Trajectory& traj) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    put(out, kVersion);
    put(out, traj.model_id());
    put(out, traj.dt());
    put(out, static_cast<std::uint32_t>(traj.n_modes()));
    put(out, static_cast<std::uint64_t>(traj.steps()));
    put(out, traj.seed());
    out.write(reinterpret_cast<const char*>(traj.data().data()),
              static_cast<std::streamsize>(traj.data().size() * sizeof(double)));
    if (!out) throw Error("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

Trajectory load_trajectory(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw ConfigError(path.string() + " is not a trajectory file");
  if (get<std::uint32_t>(in, path) != kVersion) throw ConfigError("unsupported trajectory version in " + path.string());
  auto model_id = get<std::uint64_t>(in, path);
  auto dt = get<double>(in, path);
  auto n = get<std::uint32_t>(in, path);
  auto steps = get<std::uint64_t>(in, path);
  auto seed = get<std::uint64_t>(in, path);
  if (n == 0) throw ConfigError("trajectory with zero modes in " + path.string());
  Trajectory traj(dt, static_cast<int>(n), seed, model_id);
  traj.reserve(steps + 1);
  std::vector<double> row(n);
  for (std::uint64_t i = 0; i <= steps; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ConfigError("truncated trajectory file " + path.string());
    traj.push_back(row.data());
  }
  return traj;
}

fs::path save_ensemble(const fs::path& dir, const TrajectoryEnsemble& ens) {
  fs::create_directories(dir);
  json doc;
  doc["format"] = "snsld-ensemble";
  doc["master_seed"] = ens.master_seed;
  doc["dt"] = ens.dt;
  doc["horizon"] = ens.horizon;
  doc["model_id"] = to_hex(ens.model_id);
  json members = json::array();
  for (std::size_t k = 0; k < ens.trajectories.size(); ++k) {
    char name[40];
    std::snprintf(name, sizeof name, "member_%06zu.traj", ens.indices[k]);
    save_trajectory(dir / name, ens.trajectories[k]);
    members.push_back({{"index", ens.indices[k]},
                       {"seed", ens.trajectories[k].seed()},
                       {"file", name},
                       {"states", ens.trajectories[k].size()},
                       {"sha", hash_file(dir / name)}});
  }
  doc["members"] = members;
  json failures = json::array();
  for (const auto& f : ens.failures) failures.push_back({{"index", f.index}, {"step", f.step}, {"message", f.message}});
  doc["failures"] = failures;
  fs::path index = dir / "index.json";
  write_text(index, doc.dump(1) + "\n");
  return index;
}

TrajectoryEnsemble load_ensemble(const fs::path& index_path) {
  const char* what = "ensemble index";
  json doc = parse_json(read_text(index_path), what);
  TrajectoryEnsemble ens;
  ens.master_seed = field<std::uint64_t>(doc, "master_seed", what);
  ens.dt = field<double>(doc, "dt", what);
  ens.horizon = field<double>(doc, "horizon", what);
  ens.model_id = std::stoull(field<std::string>(doc, "model_id", what), nullptr, 16);
  const fs::path dir = index_path.parent_path();
  for (const auto& m : field<json>(doc, "members", what)) {
    ens.indices.push_back(field<std::size_t>(m, "index", what));
    ens.trajectories.push_back(load_trajectory(dir / field<std::string>(m, "file", what)));
  }
  if (doc.contains("failures")) {
    for (const auto& f : doc["failures"]) {
      ens.failures.push_back({field<std::size_t>(f, "index", what), field<std::size_t>(f, "step", what),
                              field<std::string>(f, "message", what)});
    }
  }
  return ens;
}

std::string Table::to_string() const {
  std::ostringstream out;
  for (const auto& [k, v] : meta) out << "# " << k << ": " << v << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "\t" : "") << columns[i];
  out << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "\t" : "") << format_double(r[i]);
    out << "\n";
  }
  return out.str();
}

std::string Table::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return {};
}

Table parse_table(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      auto colon = line.find(": ");
      if (colon != std::string::npos) t.meta.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    std::istringstream cells(line);
    std::string cell;
    if (!header) {
      while (std::getline(cells, cell, '\t')) t.columns.push_back(cell);
      header = true;
      continue;
    }
    std::vector<double> row;
    while (std::getline(cells, cell, '\t')) {
      if (cell == "nan") {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      } else if (cell == "inf" || cell == "-inf") {
        row.push_back(cell[0] == '-' ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity());
      } else {
        double v = 0.0;
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc()) throw ConfigError("table cell '" + cell + "' is not a number");
        row.push_back(v);
      }
    }
    if (row.size() != t.columns.size()) throw ConfigError("table row width differs from the header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace snsld
