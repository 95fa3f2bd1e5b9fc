// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "turbev/turbev.hpp"

using namespace turbev;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Exec pool() { return Exec{std::max(1u, std::thread::hardware_concurrency())}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fixture::Fixture make(fixture::Preset preset, std::uint64_t seed, double sigma, int n_frames = 8) {
  fixture::FixtureParams p;
  p.preset = preset;
  p.seed = seed;
  p.n_frames = n_frames;
  p.turb.sigma_tilt = sigma;
  return fixture::make_fixture(p, pool());
}

TubeFitMap fit_centre(const fixture::Fixture& fx) {
  TubeParams tp;
  const Micros span = fx.events.t_end() - fx.events.t_begin();
  tp.half_window = std::min<Micros>(tp.half_window, span / 2);
  return fit_event_tubes(fx.events, fx.events.t_begin() + span / 2, tp, fx.turbulent.dt(), TubeEstimator::Ransac,
                         pool());
}

// ---------------------------------------------------------------------------
// 1. Event synthesis against dense 1 us stepping.

std::vector<std::pair<Micros, int>> brute_force_pixel(const std::vector<double>& intensity, Micros dt,
                                                      const EvsParams& p) {
  std::vector<std::pair<Micros, int>> out;
  std::vector<double> L;
  for (double v : intensity) L.push_back(std::log(v + p.eps));
  const double base = L[0];
  long level = 0;
  for (std::size_t k = 0; k + 1 < L.size(); ++k)
    for (Micros s = 1; s <= dt; ++s) {
      const double now = L[k] + (L[k + 1] - L[k]) * static_cast<double>(s) / static_cast<double>(dt);
      const Micros t = static_cast<Micros>(k) * dt + s;
      while (now >= base + (level + 1) * p.C) {
        ++level;
        out.emplace_back(t, 1);
      }
      while (now <= base + (level - 1) * p.C) {
        --level;
        out.emplace_back(t, -1);
      }
    }
  return out;
}

Outcome criterion_event_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const EvsParams params;
  const Micros dt = 1000;
  std::size_t mismatched = 0, total = 0;
  Micros worst = 0;
  for (int seq_i = 0; seq_i < 100; ++seq_i) {
    std::vector<Frame> frames;
    for (int k = 0; k < 4; ++k) {
      Grid<double> g(8, 8);
      for (double& v : g.values()) v = u(rng);
      frames.push_back(Frame(std::move(g)));
    }
    const FrameSequence seq(frames, 0, dt);
    const EventStream s = synthesize_events(seq, params);
    std::map<std::pair<int, int>, std::vector<std::pair<Micros, int>>> got;
    for (const Event& e : s.events()) got[{e.x, e.y}].emplace_back(e.t, e.p);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        std::vector<double> trace;
        for (const Frame& f : frames) trace.push_back(f(x, y));
        const auto want = brute_force_pixel(trace, dt, params);
        const auto& have = got[{x, y}];
        total += want.size();
        bool ok = want.size() == have.size();
        for (std::size_t i = 0; ok && i < want.size(); ++i) {
          const Micros d = want[i].first > have[i].first ? want[i].first - have[i].first : have[i].first - want[i].first;
          worst = std::max(worst, d);
          ok = want[i].second == have[i].second && d <= 1;
        }
        mismatched += !ok;
      }
  }
  return {mismatched == 0,
          fmt("%zu oracle events, %zu mismatching pixels, max |dt| %llu us", total, mismatched,
              static_cast<unsigned long long>(worst))};
}

// ---------------------------------------------------------------------------
// 2. Temporal averaging converges as frames accumulate.

Outcome criterion_convergence() {
  const Frame clean(fixture::textured_scene(128, 128));
  const std::vector<int> ladder{4, 16, 64};
  std::vector<double> mean(ladder.size(), 0.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      TurbParams tp;
      tp.seed = seed;
      tp.sigma_tilt = 1.0;
      const FrameSequence still(std::vector<Frame>(static_cast<std::size_t>(ladder[i]), clean), 0, 6000);
      const FrameSequence turb = apply_turbulence(still, generate_tilt_field(128, 128, ladder[i], tp, pool()), 0.0, pool());
      mean[i] += metrics::rmse(temporal_average(turb), clean) / 10.0;
    }
  const bool decreasing = mean[0] > mean[1] && mean[1] > mean[2];
  const bool halved = mean[2] <= 0.5 * mean[0];
  return {decreasing && halved, fmt("RMSE N=4 %.4f, N=16 %.4f, N=64 %.4f (ratio 64/4 %.3f, need <= 0.5)", mean[0],
                                    mean[1], mean[2], mean[2] / mean[0])};
}

// ---------------------------------------------------------------------------
// 3. PAEP counts track clean gradients.

Outcome criterion_paep_correlation() {
  bool pass = true;
  std::string detail;
  for (double sigma : {0.5, 1.0, 2.0}) {
    double lo = 1.0, sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const fixture::Fixture fx = make(fixture::Preset::Textured, seed, sigma);
      const PaepMap m = count_paep(fx.events, fx.events.t_begin(), fx.events.t_end() + 1, 2 * fx.turbulent.dt());
      const double r = paep_gradient_correlation(m, gradient_map(fx.clean_reference()), 2);
      lo = std::min(lo, r);
      sum += r;
    }
    pass = pass && lo >= 0.5;
    detail += fmt("%ssigma %.1f: min r %.3f mean %.3f", detail.empty() ? "" : "; ", sigma, lo, sum / 5.0);
  }
  return {pass, detail + " (need min r >= 0.5)"};
}

// ---------------------------------------------------------------------------
// 4. Clean tubes are linear.

Outcome criterion_reducibility() {
  const fixture::Fixture fx = make(fixture::Preset::Bar, 1, 0.0);
  const TubeFitMap m = fit_centre(fx);
  std::size_t tube = 0, tight = 0, close = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (m.label(x, y) != TubeLabel::Tube) continue;
      ++tube;
      tight += m.residual(x, y) <= 0.1;
      close += std::hypot(m.velocity(x, y).x - fx.params.bar_velocity.x, m.velocity(x, y).y - fx.params.bar_velocity.y) <= 0.2;
    }
  const double ft = tube ? static_cast<double>(tight) / tube : 0.0;
  const double fc = tube ? static_cast<double>(close) / tube : 0.0;
  return {tube > 0 && ft >= 0.95 && fc >= 0.9,
          fmt("%zu TUBE pixels, residual <= 0.1 on %.3f, velocity within 0.2 on %.3f", tube, ft, fc)};
}

// ---------------------------------------------------------------------------
// 5. Tube events separate from turbulence events.

Outcome criterion_separation() {
  double min_p = 1.0, min_r = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const fixture::Fixture fx = make(fixture::Preset::Bar, seed, 1.0);
    const TubeFitMap m = fit_centre(fx);
    const auto labels = classify_events(fx.events, m, m.residual_tol);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const Micros t = fx.events.events()[i].t;
      if (t + m.half_window < m.t0 || t > m.t0 + m.half_window) continue;
      const bool predicted = labels[i] == TubeLabel::Tube;
      const bool truth = fx.event_is_object[i] != 0;
      tp += predicted && truth;
      fp += predicted && !truth;
      fn += !predicted && truth;
    }
    min_p = std::min(min_p, tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0);
    min_r = std::min(min_r, tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0);
  }
  return {min_p >= 0.9 && min_r >= 0.9, fmt("min precision %.3f, min recall %.3f over 5 seeds", min_p, min_r)};
}

// ---------------------------------------------------------------------------
// 6. EPAW sharpening helps the scene branch.

double edge_band_gradient_rmse(const Frame& restored, const Frame& clean) {
  const GradientMap gc = gradient_map(clean);
  const GradientMap gr = gradient_map(restored);
  double peak = 0.0;
  for (double v : gc.magnitude().values()) peak = std::max(peak, v);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gc.magnitude().size(); ++i) {
    if (gc.magnitude().values()[i] <= 0.1 * peak) continue;
    const double d = gr.magnitude().values()[i] - gc.magnitude().values()[i];
    acc += d * d;
    ++n;
  }
  return n ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
}

struct SceneStats {
  double psnr_epaw = 0, psnr_avg = 0, grad_epaw = 0, grad_avg = 0;
  std::size_t frames = 0;
};

SceneStats scene_ensemble() {
  SceneStats s;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const fixture::Fixture fx = make(fixture::Preset::Textured, seed, 1.0);
    s.frames = fx.turbulent.size();
    const Frame epaw = epaw_restore_scene(fx.turbulent, fx.events, {});
    const Frame avg = temporal_average(fx.turbulent);
    s.psnr_epaw += metrics::psnr(epaw, fx.clean_reference()) / 10.0;
    s.psnr_avg += metrics::psnr(avg, fx.clean_reference()) / 10.0;
    s.grad_epaw += edge_band_gradient_rmse(epaw, fx.clean_reference()) / 10.0;
    s.grad_avg += edge_band_gradient_rmse(avg, fx.clean_reference()) / 10.0;
  }
  return s;
}

Outcome criterion_epaw(const SceneStats& s) {
  return {s.psnr_epaw >= s.psnr_avg && s.grad_epaw <= s.grad_avg,
          fmt("mean PSNR %.3f vs %.3f dB, edge-band gradient RMSE %.4f vs %.4f (EPAW vs average, %zu frames)",
              s.psnr_epaw, s.psnr_avg, s.grad_epaw, s.grad_avg, s.frames)};
}

// ---------------------------------------------------------------------------
// 7. Full restoration beats averaging around a moving object.

struct ObjectStats {
  double min_gain = 1e9;
  std::size_t frames = 0;
};

ObjectStats object_ensemble() {
  ObjectStats s;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const fixture::Fixture fx = make(fixture::Preset::Bar, seed, 1.0);
    s.frames = fx.turbulent.size();
    const Frame restored = restore_frame(fx.turbulent, fx.events, {}, pool());
    const double gain = metrics::psnr(restored, fx.clean_reference()) -
                        metrics::psnr(temporal_average(fx.turbulent), fx.clean_reference());
    s.min_gain = std::min(s.min_gain, gain);
  }
  return s;
}

Outcome criterion_restore(const ObjectStats& s) {
  return {s.min_gain >= 1.0, fmt("min PSNR gain over averaging %.2f dB over 5 seeds (%zu frames)", s.min_gain, s.frames)};
}

Outcome criterion_few_frames(const Outcome& c6, const Outcome& c7, const SceneStats& s, const ObjectStats& o) {
  const bool eight = s.frames == 8 && o.frames == 8;
  return {eight && c6.pass && c7.pass,
          fmt("criteria 6 and 7 ran on %zu and %zu frames: %s / %s", s.frames, o.frames, c6.pass ? "pass" : "fail",
              c7.pass ? "pass" : "fail")};
}

// ---------------------------------------------------------------------------
// 9. CLI determinism and exact formats.

int sh(const std::string& args) {
  const int raw = std::system((std::string(TURBEV_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (!fs::exists(root)) return out;
  if (fs::is_regular_file(root)) {
    out[""] = slurp(root);
    return out;
  }
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

std::string capture(const std::string& args) {
  FILE* pipe = popen((std::string(TURBEV_CLI) + " " + args + " 2>/dev/null").c_str(), "r");
  std::string out;
  if (!pipe) return out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  pclose(pipe);
  return out;
}

Outcome criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / ("turbev_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  auto at = [&](const std::string& name) { return (root / name).string(); };
  std::vector<std::string> failures;

  // Each command runs three times: twice single-threaded, once with 4 threads.
  struct Cmd {
    std::string name;
    std::function<std::string(const std::string& out, int threads)> args;
    std::string output_suffix;
    bool threaded = true;
  };
  if (sh("fixture --preset bar --seed 7 --out " + at("src")) != 0) failures.push_back("fixture setup");
  const std::string ev = at("src/events.evb");
  const std::vector<Cmd> cmds{
      {"fixture", [&](const std::string& o, int t) { return "fixture --preset bar --seed 7 --threads " + std::to_string(t) + " --out " + o; }, ""},
      {"simulate", [&](const std::string& o, int t) { return "simulate --clean " + at("src/clean") + " --seed 3 --threads " + std::to_string(t) + " --out " + o; }, ""},
      {"events", [&](const std::string& o, int t) { return "events --frames " + at("src/turbulent") + " --threads " + std::to_string(t) + " --out " + o; }, ".evb"},
      {"paep", [&](const std::string& o, int) { return "paep --events " + ev + " --out " + o; }, ".pgm", false},
      {"tube", [&](const std::string& o, int t) { return "tube --events " + ev + " --threads " + std::to_string(t) + " --out " + o; }, ""},
      {"restore", [&](const std::string& o, int t) { return "restore --frames " + at("src/turbulent") + " --events " + ev + " --threads " + std::to_string(t) + " --out " + o; }, ".pgm"},
  };
  for (const Cmd& c : cmds) {
    std::map<std::string, std::string> runs[3];
    for (int i = 0; i < 3; ++i) {
      const int threads = i == 2 && c.threaded ? 4 : 1;
      const std::string out = at(c.name + std::to_string(i) + c.output_suffix);
      if (sh(c.args(out, threads)) != 0) failures.push_back(c.name + " exit status");
      if (c.name == "tube") {
        for (const char* ext : {".tfm", ".mf1", ".mf1.valid.pgm"})
          if (fs::exists(out + ext)) runs[i][ext] = slurp(out + ext);
      } else {
        runs[i] = tree(out);
      }
    }
    if (runs[0].empty()) failures.push_back(c.name + " wrote nothing");
    if (runs[0] != runs[1]) failures.push_back(c.name + " rerun differs");
    if (runs[0] != runs[2]) failures.push_back(c.name + " --threads differs");
  }
  const std::string f = at("src/clean/frame_0007.pgm");
  const std::string g = at("restore0.pgm");
  if (capture("eval --a " + f + " --b " + g) != capture("eval --a " + f + " --b " + g)) failures.push_back("eval rerun differs");

  // Round trips.
  const fixture::Fixture fx = make(fixture::Preset::Bar, 7, 1.0);
  io::write_events(at("rt.evb"), fx.events);
  if (!(io::read_events(at("rt.evb")) == fx.events)) failures.push_back("EVB1 round trip");
  const Frame q = io::quantized(fx.turbulent[3]);
  io::write_frame(at("rt.pgm"), q);
  if (!(io::read_frame(at("rt.pgm")) == q)) failures.push_back("PGM round trip");
  io::write_motion_field(at("rt.mf1"), fx.truth);
  if (!(io::read_motion_field(at("rt.mf1")) == fx.truth)) failures.push_back("MF1 round trip");

  fs::remove_all(root);
  std::string detail = "6 subcommands x 3 runs, eval rerun, EVB1/PGM/MF1 round trips";
  for (const auto& s : failures) detail += "; " + s;
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 10. Metric closed forms.

Outcome criterion_metrics() {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 0.9);
  Grid<double> g(16, 16);
  for (double& v : g.values()) v = u(rng);
  const Frame a(g);
  auto shifted = [&](double d) {
    Grid<double> h = g;
    for (double& v : h.values()) v += d;
    return Frame(std::move(h));
  };
  auto rel = [](double got, double want) { return std::abs(got - want) / std::abs(want); };
  double worst = 0.0;
  worst = std::max(worst, rel(metrics::psnr(a, shifted(0.1)), 20.0));
  worst = std::max(worst, rel(metrics::psnr(a, shifted(0.01)), 40.0));
  worst = std::max(worst, rel(metrics::ssim(a, a), 1.0));
  worst = std::max(worst, rel(metrics::ssim(Frame::constant(8, 8, 0.4), Frame::constant(8, 8, 0.4)), 1.0));
  worst = std::max(worst, rel(metrics::charbonnier(a, a), 1e-3));
  worst = std::max(worst, rel(metrics::charbonnier(a, shifted(0.1)), std::sqrt(0.01 + 1e-6)));
  worst = std::max(worst, rel(metrics::rmse(Frame(2, 2, {0, 0, 0, 0}), Frame(2, 2, {0.2, 0, 0, 0})), 0.1));
  const bool inf_ok = std::isinf(metrics::psnr(a, a));
  return {inf_ok && worst <= 1e-9, fmt("max relative error %.2e, identical-frame psnr %s", worst, inf_ok ? "inf" : "finite")};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = fn();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "C" << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail
              << fmt(" [%.1fs]", secs) << std::endl;
    failed += !o.pass;
    return o;
  };

  report(1, "event-synthesis oracle", criterion_event_oracle);
  report(2, "zero-mean convergence", criterion_convergence);
  report(3, "PAEP-gradient correlation", criterion_paep_correlation);
  report(4, "tube reducibility", criterion_reducibility);
  report(5, "tube/turbulence separation", criterion_separation);
  SceneStats scene;
  ObjectStats object;
  const Outcome c6 = report(6, "EPAW improvement", [&] {
    scene = scene_ensemble();
    return criterion_epaw(scene);
  });
  const Outcome c7 = report(7, "dynamic-object restoration", [&] {
    object = object_ensemble();
    return criterion_restore(object);
  });
  report(8, "few-frame contract", [&] { return criterion_few_frames(c6, c7, scene, object); });
  report(9, "determinism and formats", criterion_determinism);
  report(10, "metric oracles", criterion_metrics);

  std::cout << (10 - failed) << "/10 criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
