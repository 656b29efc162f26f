#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mfeit/asymptotics.hpp"
#include "mfeit/errors.hpp"
#include "mfeit/fusion.hpp"
#include "mfeit/manifest.hpp"
#include "mfeit/reconstruct.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mfeit;

namespace {

enum Exit { kOk = 0, kConfig = 2, kSolver = 3, kIoExit = 4, kDetection = 5 };

struct Options {
  std::string config_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> sign;
};

struct RunConfig {
  json raw;
  fs::path base;  // directory of the config file
  PhantomSpec phantom;
  SweepConfig sweep;
  double h = 0.05;
  InterfaceModel model = InterfaceModel::kZeroThickness;
  int pixels = 32;
  double coverage = 0.5;
  Regularization reg;
  int pca_n = 2;
  bool add_mean = false;
  SignConvention sign = SignConvention::kMinus;
};

// Config-level failures are raised as InvalidInput so they map to exit 2.
[[noreturn]] void bad_config(const std::string& what) {
  throw Error(ErrorCode::kInvalidInput, "config: " + what);
}

RunConfig load_config(const Options& opt) {
  std::ifstream in(opt.config_path);
  if (!in) bad_config("cannot open " + opt.config_path);
  RunConfig c;
  try {
    c.raw = json::parse(in);
  } catch (const json::exception& e) {
    bad_config(e.what());
  }
  c.base = fs::path(opt.config_path).parent_path();
  const json& j = c.raw;
  try {
    if (j.contains("phantom")) {
      const fs::path p = c.base / j["phantom"].get<std::string>();
      if (!fs::exists(p)) bad_config("phantom file " + p.string() + " not found");
      c.phantom = load_phantom_spec(p.string());
    }
    if (j.contains("sweep")) c.sweep = sweep_config_from_json(j["sweep"]);
    if (opt.seed) c.sweep.seed = *opt.seed;
    const json mesh = j.value("mesh", json::object());
    c.h = mesh.value("h", c.h);
    c.pixels = mesh.value("pixels", c.pixels);
    const std::string model = mesh.value("model", std::string("zero_thickness"));
    if (model == "resolved") c.model = InterfaceModel::kResolved;
    else if (model != "zero_thickness") bad_config("mesh.model must be resolved or zero_thickness");
    c.coverage = j.value("electrode_coverage", c.coverage);
    const json reg = j.value("regularization", json::object());
    c.reg.alpha = reg.value("alpha", c.reg.alpha);
    c.reg.noise_std = reg.value("noise_std", c.reg.noise_std);
    const json pca = j.value("pca", json::object());
    c.pca_n = pca.value("n_components", c.pca_n);
    c.add_mean = pca.value("add_mean", c.add_mean);
    c.sign = parse_sign(opt.sign ? *opt.sign : j.value("sign", std::string("minus")));
  } catch (const json::exception& e) {
    bad_config(e.what());
  }
  if (!(c.h > 0.0)) bad_config("mesh.h must be positive");
  if (c.pixels < 2) bad_config("mesh.pixels must be at least 2");
  if (c.pca_n < 1) bad_config("pca.n_components must be at least 1");
  return c;
}

std::string index_name(const std::string& prefix, int i, const std::string& ext) {
  std::ostringstream os;
  os << prefix << std::setw(2) << std::setfill('0') << i << ext;
  return os.str();
}

ManifestEntry entry(const fs::path& dir, const std::string& name, const std::string& role) {
  return {name, role, sha256_file((dir / name).string())};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

std::vector<BoundaryDataset> read_stage(const fs::path& dir, const std::string& role) {
  std::vector<BoundaryDataset> out;
  for (const auto& p : manifest_files(dir.string(), "simulate", role)) {
    auto v = read_dataset_csv(p);
    out.insert(out.end(), v.begin(), v.end());
  }
  if (out.empty()) throw Error(ErrorCode::kIo, "no " + role + " datasets in " + dir.string());
  return out;
}

int cmd_simulate(const Options& opt) {
  const RunConfig c = load_config(opt);
  if (!c.raw.contains("phantom") || !c.raw.contains("sweep")) bad_config("needs phantom and sweep");
  const fs::path dir = opt.out;
  ensure_dir(dir);
  const Phantom phantom = build_phantom(c.phantom);
  MeshOptions mo;
  mo.model = c.model;
  mo.pixels = c.pixels;
  const Mesh mesh = mesh_domain(phantom, c.h, mo);
  const auto layout = ElectrodeLayout::equally_spaced(c.sweep.n_electrodes, c.coverage);
  std::vector<Frequency> freqs;
  for (double f : c.sweep.frequencies_hz) freqs.push_back(Frequency::from_hz(f));

  auto data = simulate_sweep(phantom, mesh, layout, freqs);
  SweepOptions so;
  so.medium = Medium::kHomogeneous;
  auto refs = simulate_sweep(phantom, mesh, layout, freqs, so);

  std::vector<ManifestEntry> files;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    BoundaryDataset d = mask_adjacent(data[i]);
    if (c.sweep.snr_db > 0.0 && std::isfinite(c.sweep.snr_db)) {
      d = add_noise(d, c.sweep.snr_db, c.sweep.seed + i);
    }
    const std::string dn = index_name("data_f", static_cast<int>(i), ".csv");
    const std::string rn = index_name("ref_f", static_cast<int>(i), ".csv");
    write_dataset_csv((dir / dn).string(), {d});
    write_dataset_csv((dir / rn).string(), {mask_adjacent(refs[i])});
    files.push_back(entry(dir, dn, "data"));
    files.push_back(entry(dir, rn, "reference"));
  }
  const json params = {{"config", c.raw},
                       {"seed", c.sweep.seed},
                       {"nodes", mesh.nodes.size()},
                       {"triangles", mesh.triangles.size()}};
  write_manifest_stage(dir.string(), "simulate", params, files);
  std::cout << "simulate: " << freqs.size() << " frequencies, " << files.size() << " files in "
            << dir.string() << "\n";
  return kOk;
}

// Reference mesh for the sensitivity: the bare domain with the phantom's materials.
Mesh sensitivity_mesh(const RunConfig& c) {
  PhantomSpec bare;
  bare.domain_radius = c.phantom.domain_radius;
  bare.materials = c.phantom.materials;
  MeshOptions mo;
  mo.pixels = c.pixels;
  return mesh_domain(build_phantom(bare), c.h, mo);
}

int cmd_reconstruct(const Options& opt) {
  const RunConfig c = load_config(opt);
  const fs::path dir = opt.out;
  auto data = read_stage(dir, "data");
  auto refs = read_stage(dir, "reference");
  if (data.size() != refs.size()) throw Error(ErrorCode::kIo, "data/reference count differs");
  const Mesh mesh = sensitivity_mesh(c);
  const auto layout = ElectrodeLayout::equally_spaced(data[0].n_electrodes, c.coverage);
  const SensitivityMatrix J = build_sensitivity(mesh, layout, c.phantom.materials, data[0].mask);
  const ImageStack stack = reconstruct_sweep(data, refs, J, c.reg);

  std::vector<ManifestEntry> files;
  write_image_csv((dir / "images.csv").string(), stack);
  files.push_back(entry(dir, "images.csv", "image_stack"));
  json freqs = json::array();
  for (int f = 0; f < stack.images.cols(); ++f) {
    freqs.push_back(stack.frequencies[f].hz());
    for (const char* part : {"re", "im"}) {
      const std::string name = index_name("image_f", f, std::string("_") + part + ".pgm");
      const Eigen::VectorXd v = part[0] == 'r' ? Eigen::VectorXd(stack.images.col(f).real())
                                               : Eigen::VectorXd(stack.images.col(f).imag());
      write_pgm((dir / name).string(), stack.pixels, v);
      files.push_back(entry(dir, name, "pgm"));
    }
  }
  const json meta = {{"frequencies_hz", freqs},
                     {"pixels_per_side", stack.pixels.n},
                     {"domain_radius", stack.pixels.domain_radius},
                     {"normalization", "per-image max |value|"},
                     {"alpha", c.reg.alpha},
                     {"noise_std", c.reg.noise_std}};
  write_json(dir / "images.json", meta);
  files.push_back(entry(dir, "images.json", "metadata"));
  write_manifest_stage(dir.string(), "reconstruct", {{"config", c.raw}}, files);
  std::cout << "reconstruct: " << stack.images.cols() << " frequencies, "
            << stack.images.rows() << " pixels\n";
  return kOk;
}

int cmd_fuse(const Options& opt) {
  const RunConfig c = load_config(opt);
  const fs::path dir = opt.out;
  const auto paths = manifest_files(dir.string(), "reconstruct", "image_stack");
  if (paths.empty()) throw Error(ErrorCode::kIo, "no image stack in " + dir.string());
  const ImageStack stack = read_image_csv(paths[0], c.pixels, c.phantom.domain_radius);

  std::vector<ManifestEntry> files;
  json meta = json::object();
  for (ImagePart part : {ImagePart::kReal, ImagePart::kImag}) {
    const std::string tag = part == ImagePart::kReal ? "real" : "imag";
    const FusedImage fused = fuse(stack, c.pca_n, part, c.add_mean);
    if (!fused.warning.empty()) std::cerr << "warning (" << tag << "): " << fused.warning << "\n";
    ImageStack one;
    one.pixels = stack.pixels;
    one.frequencies = {Frequency{0.0}};
    one.images = fused.values.cast<Complex>();
    write_image_csv((dir / ("fused_" + tag + ".csv")).string(), one);
    write_pgm((dir / ("fused_" + tag + ".pgm")).string(), stack.pixels, fused.values);
    files.push_back(entry(dir, "fused_" + tag + ".csv", "fused"));
    files.push_back(entry(dir, "fused_" + tag + ".pgm", "pgm"));
    std::vector<double> ev(fused.pca.eigenvalues.data(),
                           fused.pca.eigenvalues.data() + fused.pca.eigenvalues.size());
    meta[tag] = {{"eigenvalues", ev},
                 {"n_kept", fused.pca.n_kept},
                 {"rank", fused.pca.rank},
                 {"energy_fraction", fused.energy_fraction},
                 {"add_mean", c.add_mean},
                 {"warning", fused.warning}};
  }
  write_json(dir / "fused.json", meta);
  files.push_back(entry(dir, "fused.json", "metadata"));
  write_manifest_stage(dir.string(), "fuse", {{"config", c.raw}}, files);
  std::cout << "fuse: N = " << c.pca_n << "\n";
  return kOk;
}

// Residues of G_re + i G_im come from Phi, those of G_re - i G_im from conj(Phi).
int cmd_detect(const Options& opt) {
  const RunConfig c = load_config(opt);
  const fs::path dir = opt.out;
  const json dj = c.raw.value("detect", json::object());
  PoleRecoveryConfig pc;
  int n_samples = 128;
  double min_hz = 1e5;
  Vec2 a(1.0, 0.0);
  try {
    pc.fit_tol = dj.value("fit_tol", 0.05);
    pc.max_order = dj.value("max_order", 6);
    pc.max_double = dj.value("max_double", pc.max_double);
    n_samples = dj.value("contour_samples", n_samples);
    min_hz = dj.value("min_frequency_hz", min_hz);
    if (dj.contains("a")) {
      const auto v = dj["a"].get<std::vector<double>>();
      if (v.size() != 2) bad_config("detect.a must have two entries");
      a = Vec2(v[0], v[1]);
    }
  } catch (const json::exception& e) {
    bad_config(e.what());
  }
  auto data = read_stage(dir, "data");
  auto refs = read_stage(dir, "reference");
  std::size_t best = 0;
  for (std::size_t i = 1; i < data.size(); ++i) {
    if (data[i].omega.omega > data[best].omega.omega) best = i;
  }
  if (data[best].omega.hz() < min_hz) {
    bad_config("no dataset at or above " + std::to_string(min_hz) + " Hz");
  }
  const double R = c.phantom.domain_radius;
  const auto layout = ElectrodeLayout::equally_spaced(data[best].n_electrodes, c.coverage);
  const Complex gb = gamma_background(data[best].omega, c.phantom.materials);
  auto u = electrode_perturbation(data[best], refs[best], a, R);
  for (auto& v : u) v *= gb;
  const auto phi = boundary_operator(u, c.sign);
  std::vector<Complex> phi_conj(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) phi_conj[i] = std::conj(phi[i]);

  const auto plus = recover_poles(0.0, R, identification_samples(phi, R, R, n_samples, layout.width), pc);
  const auto minus =
      recover_poles(0.0, R, identification_samples(phi_conj, R, R, n_samples, layout.width), pc);

  auto nearest_simple = [&](Complex z) {
    Complex best_r = 0.0;
    double dmin = INFINITY;
    for (const auto& p : minus.model.simple_poles) {
      if (std::abs(p.location - z) < dmin) dmin = std::abs(p.location - z), best_r = p.residue;
    }
    return best_r;
  };
  auto nearest_double = [&](Complex z) {
    Complex best_s = 0.0;
    double dmin = INFINITY;
    for (const auto& p : minus.model.double_poles) {
      if (std::abs(p.location - z) < dmin) dmin = std::abs(p.location - z), best_s = p.strength;
    }
    return best_s;
  };

  json report = {{"segments", json::array()}, {"disks", json::array()}};
  const auto& m = plus.model;
  for (const auto& s : m.segments) {
    const auto& P = m.simple_poles[s[0]];
    const auto& Q = m.simple_poles[s[1]];
    const Complex rp = Q.residue, rm = nearest_simple(Q.location);
    report["segments"].push_back({{"P", complex_json(P.location)},
                                  {"Q", complex_json(Q.location)},
                                  {"C_re", complex_json(0.5 * (rp + rm))},
                                  {"C_im", complex_json((rp - rm) / Complex(0.0, 2.0))}});
  }
  for (const auto& d : m.double_poles) {
    const Complex sp = d.strength, sm = nearest_double(d.location);
    report["disks"].push_back({{"z", complex_json(d.location)},
                               {"D_re", complex_json(0.5 * (sp + sm))},
                               {"D_im", complex_json((sp - sm) / Complex(0.0, 2.0))}});
  }
  report["fit_residual"] = std::max(plus.fit_residual, minus.fit_residual);
  report["frequency_hz"] = data[best].omega.hz();
  report["sign"] = to_string(c.sign);
  write_json(dir / "detection.json", report);
  write_manifest_stage(dir.string(), "detect", {{"config", c.raw}},
                       {entry(dir, "detection.json", "report")});
  std::cout << "detect: " << report["segments"].size() << " segments, "
            << report["disks"].size() << " disks, residual " << report["fit_residual"] << "\n";
  return kOk;
}

int cmd_validate_jump(const Options& opt) {
  const RunConfig c = load_config(opt);
  const json vj = c.raw.value("validate_jump", json::object());
  std::vector<double> deltas, freqs_hz{10.0, 5e4, 5e5};
  Vec2 p(-0.5, 0.0), q(0.5, 0.0), a(0.6, 0.8);
  double c0 = 0.1;
  try {
    deltas = vj.at("deltas").get<std::vector<double>>();
    freqs_hz = vj.value("frequencies_hz", freqs_hz);
    c0 = vj.value("c0_fraction", c0);
    if (vj.contains("p")) p = Vec2(vj["p"][0].get<double>(), vj["p"][1].get<double>());
    if (vj.contains("q")) q = Vec2(vj["q"][0].get<double>(), vj["q"][1].get<double>());
    if (vj.contains("a")) a = Vec2(vj["a"][0].get<double>(), vj["a"][1].get<double>());
  } catch (const json::exception& e) {
    bad_config(e.what());
  }
  if (deltas.size() < 3) bad_config("validate_jump.deltas needs at least three entries");
  for (std::size_t i = 1; i < deltas.size(); ++i) {
    if (!(deltas[i] < deltas[i - 1])) bad_config("validate_jump.deltas must decrease");
  }
  const fs::path dir = opt.out;
  ensure_dir(dir);

  json rows = json::array();
  std::ostringstream text;
  text << std::setprecision(6);
  for (double fhz : freqs_hz) {
    const Frequency F = Frequency::from_hz(fhz);
    std::vector<double> err_u, err_dnu;
    double scale = 0.0;
    for (double d : deltas) {
      PhantomSpec spec;
      spec.domain_radius = c.phantom.domain_radius;
      spec.materials = c.phantom.materials;
      spec.insulators.push_back({p, q, d});
      const Phantom ph = build_phantom(spec);
      MeshOptions mo;
      mo.model = InterfaceModel::kResolved;
      const Mesh mesh = mesh_domain(ph, c.h, mo);
      const auto field = solve_resolved(mesh, ph, F, uniform_field_current(mesh, a));
      const auto jp = jump_profile(mesh, ph, field, 0, c0);
      double eu = 0.0, ed = 0.0;
      for (std::size_t i = 0; i < jp.s.size(); ++i) {
        eu = std::max(eu, std::abs(jp.jump_u[i] - jp.predicted_jump[i]));
        ed = std::max(ed, std::abs(jp.jump_dnu[i]));
        scale = std::max(scale, std::abs(jp.dnu_plus[i]));
      }
      err_u.push_back(eu);
      err_dnu.push_back(ed);
    }
    // Errors at round-off relative to the field carry no order.
    auto order = [&](const std::vector<double>& e) -> json {
      const double floor = 1e-10 * std::max(scale, 1.0);
      for (double v : e) {
        if (!(v > floor)) return nullptr;
      }
      return fitted_order(deltas, e);
    };
    const json ou = order(err_u), od = order(err_dnu);
    rows.push_back({{"frequency_hz", fhz},
                    {"lambda_c", complex_json(lambda_c(F, c.phantom.materials))},
                    {"deltas", deltas},
                    {"max_jump_error", err_u},
                    {"max_dnu_jump", err_dnu},
                    {"order_jump", ou},
                    {"order_dnu", od}});
    text << "f = " << fhz << " Hz\n";
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      text << "  delta " << deltas[i] << "  jump error " << err_u[i] << "  [du/dnu] "
           << err_dnu[i] << "\n";
    }
    text << "  order jump " << (ou.is_null() ? std::string("n/a") : std::to_string(ou.get<double>()))
         << "  order [du/dnu] "
         << (od.is_null() ? std::string("n/a") : std::to_string(od.get<double>())) << "\n";
  }
  write_json(dir / "jump_report.json", {{"frequencies", rows}, {"h", c.h}});
  {
    std::ofstream out(dir / "jump_report.txt");
    if (!out) throw Error(ErrorCode::kIo, "cannot write jump_report.txt");
    out << text.str();
  }
  std::cout << text.str();
  write_manifest_stage(dir.string(), "validate-jump", {{"config", c.raw}},
                       {entry(dir, "jump_report.json", "report"),
                        entry(dir, "jump_report.txt", "summary")});
  return kOk;
}

int exit_code(ErrorCode code, bool detecting) {
  switch (code) {
    case ErrorCode::kIo:
      return kIoExit;
    case ErrorCode::kInvalidInput:
    case ErrorCode::kSeparationViolation:
    case ErrorCode::kOutOfDomain:
    case ErrorCode::kSegmentNotFound:
    case ErrorCode::kBadIndex:
      return kConfig;
    case ErrorCode::kModelOrderFailure:
    case ErrorCode::kPoleCollision:
    case ErrorCode::kPoleEvaluation:
      return detecting ? kDetection : kSolver;
    default:
      return kSolver;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-frequency EIT toolkit"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  std::string sign;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "run configuration JSON")->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", seed, "noise seed, overrides the config");
    sub->add_option("--sign-flag", sign, "boundary operator sign")
        ->check(CLI::IsMember({"plus", "minus"}));
  };
  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> commands = {
      {app.add_subcommand("simulate", "forward sweep and reference datasets"), cmd_simulate},
      {app.add_subcommand("reconstruct", "per-frequency linearized images"), cmd_reconstruct},
      {app.add_subcommand("detect", "inclusion detection from high-frequency data"), cmd_detect},
      {app.add_subcommand("fuse", "PCA fusion of the image stack"), cmd_fuse},
      {app.add_subcommand("validate-jump", "jump-condition convergence study"),
       cmd_validate_jump},
  };
  for (auto& [sub, fn] : commands) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  for (auto& [sub, fn] : commands) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--sign-flag")) opt.sign = sign;
    const bool detecting = sub->get_name() == "detect";
    try {
      return fn(opt);
    } catch (const Error& e) {
      std::cerr << "mfeit " << sub->get_name() << ": " << e.what() << "\n";
      return exit_code(e.code(), detecting);
    } catch (const std::exception& e) {
      std::cerr << "mfeit " << sub->get_name() << ": " << e.what() << "\n";
      return kSolver;
    }
  }
  return kConfig;
}
