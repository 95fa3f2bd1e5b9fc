// turbev command-line driver.
//
// Every subcommand accepts `--config <file>` with `key = value` lines ('#'
// starts a comment). Keys are long flag names without the dashes; flags on
// the command line win over the file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "turbev/turbev.hpp"

namespace fs = std::filesystem;
using namespace turbev;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIoError = 2, kValidation = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Turns `key = value` lines into `--key value` tokens.
std::vector<std::string> config_tokens(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "--config: cannot open '" + path.string() + "'");
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("--config " + path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw UsageError("--config " + path.string() + ":" + std::to_string(lineno) + ": empty key");
    out.push_back("--" + key);
    out.push_back(value);
  }
  return out;
}

/// Splices config-file tokens in front of the subcommand's own flags so the
/// command line, parsed later, takes precedence.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    std::size_t span = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      span = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      span = 1;
    } else {
      continue;
    }
    const auto tokens = config_tokens(path);
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + span));
    // Right after the subcommand name (the first token), before any flag.
    const std::size_t at = args.empty() ? 0 : 1;
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), tokens.begin(), tokens.end());
    break;
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
  return args;
}

void print_config(const CLI::App& sub) {
  std::cerr << "# " << sub.get_name() << " resolved config\n";
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->reduced_results()) value += (value.empty() ? "" : " ") + r;
    } else {
      value = opt->get_default_str();
    }
    std::cerr << name << " = " << value << '\n';
  }
}

Exec exec_of(unsigned threads) { return Exec{threads == 0 ? 1u : threads}; }

// ----------------------------------------------------------------------------

struct SimulateArgs {
  std::string clean, out;
  TurbParams turb;
  int frames = 0;
  Micros dt = 0;
  unsigned threads = 1;
};

int run_simulate(const SimulateArgs& a) {
  FrameSequence clean = io::read_frames(a.clean);
  const int n = a.frames > 0 ? a.frames : static_cast<int>(clean.size());
  std::vector<Frame> frames;
  if (clean.size() == 1) {
    frames.assign(static_cast<std::size_t>(n), clean[0]);
  } else {
    if (static_cast<std::size_t>(n) > clean.size())
      throw UsageError("--frames: " + std::to_string(n) + " requested but --clean holds " + std::to_string(clean.size()));
    frames.assign(clean.frames().begin(), clean.frames().begin() + n);
  }
  const Micros dt = a.dt > 0 ? a.dt : (clean.size() > 1 ? clean.dt() : 6000);
  const FrameSequence seq(std::move(frames), clean.t0(), dt);
  const Exec ex = exec_of(a.threads);
  const TurbulenceField field = generate_tilt_field(seq.width(), seq.height(), static_cast<int>(seq.size()), a.turb, ex);
  const FrameSequence turb = apply_turbulence(seq, field, a.turb.blur_sigma, ex);
  fs::create_directories(a.out);
  io::write_frames(fs::path(a.out) / "frames", turb);
  io::write_turbulence_field(fs::path(a.out) / "tilt.tf1", field);
  std::cout << "frames=" << turb.size() << " max_tilt=" << field.max_tilt() << '\n';
  return kOk;
}

struct FixtureArgs {
  std::string out, preset = "bar";
  fixture::FixtureParams params;
  unsigned threads = 1;
};

void write_mask(const fs::path& path, const Mask& m) {
  Grid<std::uint16_t> g(m.width(), m.height());
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = m.values()[i] ? 255 : 0;
  io::write_pgm(path, g, 255);
}

int run_fixture(FixtureArgs a) {
  a.params.preset = fixture::parse_preset(a.preset);
  const fixture::Fixture fx = fixture::make_fixture(a.params, exec_of(a.threads));
  const fs::path out(a.out);
  fs::create_directories(out / "masks");
  io::write_frames(out / "clean", fx.clean);
  io::write_frames(out / "turbulent", fx.turbulent);
  io::write_events(out / "events.evb", fx.events);
  io::write_turbulence_field(out / "tilt.tf1", fx.field);
  io::write_motion_field(out / "truth.mf1", fx.truth);
  for (std::size_t k = 0; k < fx.object_masks.size(); ++k) write_mask(out / "masks" / io::frame_filename(k), fx.object_masks[k]);
  std::string labels;
  for (std::uint8_t l : fx.event_is_object) labels += l ? "1\n" : "0\n";
  std::ofstream(out / "event_labels.txt", std::ios::binary) << labels;
  std::cout << "preset=" << fixture::preset_name(a.params.preset) << " frames=" << fx.clean.size()
            << " events=" << fx.events.size() << '\n';
  return kOk;
}

struct EventsArgs {
  std::string frames, out;
  EvsParams evs;
  unsigned threads = 1;
};

int run_events(const EventsArgs& a) {
  const FrameSequence seq = io::read_frames(a.frames);
  const EventStream s = synthesize_events(seq, a.evs, exec_of(a.threads));
  if (fs::path(a.out).extension() == ".csv")
    io::write_events_csv(a.out, s);
  else
    io::write_events(a.out, s);
  std::cout << "events=" << s.size() << '\n';
  return kOk;
}

EventStream load_events(const std::string& path) {
  return fs::path(path).extension() == ".csv" ? io::read_events_csv(path) : io::read_events(path);
}

struct PaepArgs {
  std::string events, frame, out, weights_out;
  Micros window = 0;
  Micros max_gap = 12000;
  int margin = 2;
  double beta = 1.0;
};

int run_paep(const PaepArgs& a) {
  const EventStream s = load_events(a.events);
  const Micros begin = s.t_begin();
  const Micros end = a.window > 0 ? begin + a.window : s.t_end() + 1;
  const PaepMap paep = count_paep(s, begin, end, a.max_gap);
  if (!a.out.empty()) io::write_paep_pgm(a.out, paep);
  if (!a.weights_out.empty()) io::write_weights_pgm(a.weights_out, epaw_weights(paep, a.beta));
  if (!a.frame.empty()) {
    const Frame ref = io::read_frame(a.frame);
    std::cout << "r=" << io::detail::format_double(paep_gradient_correlation(paep, gradient_map(ref), a.margin)) << '\n';
  } else {
    std::cout << "max_count=" << paep.max_count() << '\n';
  }
  return kOk;
}

struct TubeArgs {
  std::string events, out = "tube";
  std::optional<Micros> t0;
  Micros frame_dt = 0;
  TubeParams tube;
  unsigned threads = 1;
};

int run_tube(const TubeArgs& a) {
  const EventStream s = load_events(a.events);
  const Micros t0 = a.t0.value_or(s.t_begin() + (s.t_end() - s.t_begin()) / 2);
  std::optional<Micros> dt;
  if (a.frame_dt > 0) dt = a.frame_dt;
  const TubeFitMap fits = fit_event_tubes(s, t0, a.tube, dt, TubeEstimator::Ransac, exec_of(a.threads));
  io::write_tube_fits(a.out + ".tfm", fits);
  io::write_motion_field(a.out + ".mf1", project_to_motion_field(fits));
  std::cout << "tube=" << fits.count(TubeLabel::Tube) << " turbulence=" << fits.count(TubeLabel::Turbulence)
            << " empty=" << fits.count(TubeLabel::Empty) << '\n';
  return kOk;
}

struct RestoreArgs {
  std::string frames, events, out;
  RestoreParams params;
  std::optional<std::size_t> t_ref;
  unsigned threads = 1;
};

int run_restore(RestoreArgs a) {
  const FrameSequence seq = io::read_frames(a.frames);
  const EventStream s = load_events(a.events);
  a.params.t_ref = a.t_ref;
  const Frame out = restore_frame(seq, s, a.params, exec_of(a.threads));
  io::write_frame(a.out, out);
  return kOk;
}

struct EvalArgs {
  std::string a, b;
};

int run_eval(const EvalArgs& e) {
  const Frame a = io::read_frame(e.a);
  const Frame b = io::read_frame(e.b);
  const double p = metrics::psnr(a, b);
  char line[256];
  std::snprintf(line, sizeof line, "psnr=%s ssim=%.6f charbonnier=%.6f rmse=%.6f",
                std::isinf(p) ? "inf" : std::to_string(p).c_str(), metrics::ssim(a, b), metrics::charbonnier(a, b),
                metrics::rmse(a, b));
  std::cout << line << '\n';
  return kOk;
}

void add_threads(CLI::App* sub, unsigned& threads) {
  sub->add_option("--threads", threads, "worker threads (output is identical for any count)")->check(CLI::Range(1u, 1024u));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turbulence simulation, event synthesis and event-guided restoration"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_unused;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_unused, "key = value file; command-line flags override it");
  };

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Apply synthetic turbulence to a clean frame sequence");
  add_config(simulate);
  simulate->add_option("--clean", sim.clean, "clean frames directory (manifest.txt)")->required();
  simulate->add_option("--out", sim.out, "output directory")->required();
  simulate->add_option("--sigma-tilt", sim.turb.sigma_tilt, "RMS tilt magnitude [px]");
  simulate->add_option("--corr-len", sim.turb.corr_len, "spatial correlation length [px]");
  simulate->add_option("--rho-t", sim.turb.rho_t, "AR(1) frame-to-frame correlation [0,1)");
  simulate->add_option("--blur", sim.turb.blur_sigma, "post-warp Gaussian blur sigma [px]");
  simulate->add_option("--frames", sim.frames, "output frame count (0: as many as --clean)");
  simulate->add_option("--dt-us", sim.dt, "frame interval [us] (0: from --clean, else 6000)");
  simulate->add_option("--seed", sim.turb.seed, "tilt field seed");
  add_threads(simulate, sim.threads);

  FixtureArgs fix;
  auto* fixture_cmd = app.add_subcommand("fixture", "Write a standard synthetic fixture");
  add_config(fixture_cmd);
  fixture_cmd->add_option("--out", fix.out, "output directory")->required();
  fixture_cmd->add_option("--preset", fix.preset, "static | bar | textured")
      ->check(CLI::IsMember({"static", "bar", "textured"}));
  fixture_cmd->add_option("--seed", fix.params.seed, "turbulence seed");
  fixture_cmd->add_option("--frames", fix.params.n_frames, "visible frame count");
  fixture_cmd->add_option("--width", fix.params.width, "width [px] (0: preset default)");
  fixture_cmd->add_option("--height", fix.params.height, "height [px] (0: preset default)");
  fixture_cmd->add_option("--dt-us", fix.params.dt, "frame interval [us]");
  fixture_cmd->add_option("--sigma-tilt", fix.params.turb.sigma_tilt, "RMS tilt magnitude [px]");
  fixture_cmd->add_option("--corr-len", fix.params.turb.corr_len, "spatial correlation length [px]");
  fixture_cmd->add_option("--rho-t", fix.params.turb.rho_t, "AR(1) frame-to-frame correlation [0,1)");
  fixture_cmd->add_option("--threshold", fix.params.evs.C, "event contrast threshold C [log units]");
  add_threads(fixture_cmd, fix.threads);

  EventsArgs ev;
  auto* events = app.add_subcommand("events", "Synthesize an event stream from frames");
  add_config(events);
  events->add_option("--frames", ev.frames, "frames directory (manifest.txt)")->required();
  events->add_option("--out", ev.out, "output file (.evb binary, .csv text)")->required();
  events->add_option("--threshold", ev.evs.C, "contrast threshold C [log units]");
  events->add_option("--eps", ev.evs.eps, "log offset added to intensity");
  events->add_option("--refractory", ev.evs.refractory, "per-pixel refractory period [us]");
  add_threads(events, ev.threads);

  PaepArgs pa;
  auto* paep = app.add_subcommand("paep", "Count polarity-alternating event pairs");
  add_config(paep);
  paep->add_option("--events", pa.events, "event file (.evb or .csv)")->required();
  paep->add_option("--frame", pa.frame, "reference PGM; prints r against its Sobel magnitude");
  paep->add_option("--window-us", pa.window, "counting window length from the stream start [us] (0: whole span)");
  paep->add_option("--max-gap-us", pa.max_gap, "largest gap inside a pair [us]");
  paep->add_option("--margin", pa.margin, "border excluded from the correlation [px]");
  paep->add_option("--out", pa.out, "16-bit PGM of the counts");
  paep->add_option("--weights-out", pa.weights_out, "16-bit PGM of the EPAW weights");
  paep->add_option("--beta", pa.beta, "EPAW weight gain");

  TubeArgs tu;
  auto* tube = app.add_subcommand("tube", "Fit per-pixel event tubes");
  add_config(tube);
  tube->add_option("--events", tu.events, "event file (.evb or .csv)")->required();
  tube->add_option("--out", tu.out, "output prefix (.tfm fits, .mf1 motion field)");
  tube->add_option("--t0-us", tu.t0, "window centre [us] (default: middle of the stream span)");
  tube->add_option("--half-window-us", tu.tube.half_window, "temporal half window [us]");
  tube->add_option("--radius", tu.tube.radius, "spatial neighbourhood radius [px]");
  tube->add_option("--tol", tu.tube.residual_tol, "inlier and residual tolerance [px]");
  tube->add_option("--min-support", tu.tube.min_support, "minimum inliers and distinct pixels");
  tube->add_option("--min-duration-us", tu.tube.min_duration, "minimum time covered by the inliers [us]");
  tube->add_option("--iters", tu.tube.ransac_iters, "RANSAC hypotheses per pixel");
  tube->add_option("--seed", tu.tube.seed, "RANSAC seed");
  tube->add_option("--frame-dt-us", tu.frame_dt, "frame interval [us]; velocities in px/frame (0: px/ms)");
  add_threads(tube, tu.threads);

  RestoreArgs re;
  auto* restore = app.add_subcommand("restore", "Restore one frame from frames plus events");
  add_config(restore);
  restore->add_option("--frames", re.frames, "turbulent frames directory (manifest.txt)")->required();
  restore->add_option("--events", re.events, "event file (.evb or .csv)")->required();
  restore->add_option("--out", re.out, "restored 8-bit PGM")->required();
  restore->add_option("--t-ref", re.t_ref, "reference frame index (default: last)");
  restore->add_option("--half-window-us", re.params.tube.half_window, "tube half window [us]");
  restore->add_option("--radius", re.params.tube.radius, "tube neighbourhood radius [px]");
  restore->add_option("--tol", re.params.tube.residual_tol, "tube tolerance [px]");
  restore->add_option("--min-support", re.params.tube.min_support, "tube minimum support");
  restore->add_option("--min-duration-us", re.params.tube.min_duration, "tube minimum duration [us]");
  restore->add_option("--iters", re.params.tube.ransac_iters, "RANSAC hypotheses per pixel");
  restore->add_option("--seed", re.params.tube.seed, "RANSAC seed");
  restore->add_option("--beta", re.params.epaw.beta, "EPAW weight gain");
  restore->add_option("--lambda", re.params.epaw.lambda, "sharpening strength");
  restore->add_option("--sigma-us", re.params.epaw.sigma_us, "unsharp-mask blur sigma [px]");
  restore->add_option("--max-gap-us", re.params.epaw.max_gap, "PAEP pair gap [us] (0: two frame intervals)");
  restore->add_option("--dilate", re.params.dilate_radius, "object mask dilation radius [px]");
  add_threads(restore, re.threads);

  EvalArgs evl;
  auto* eval = app.add_subcommand("eval", "Compare two PGM frames");
  add_config(eval);
  eval->add_option("--a", evl.a, "first PGM")->required();
  eval->add_option("--b", evl.b, "second PGM")->required();

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_io() ? kIoError : kValidation;
  }

  try {
    for (const CLI::App* sub : app.get_subcommands()) print_config(*sub);
    if (*simulate) return run_simulate(sim);
    if (*fixture_cmd) return run_fixture(fix);
    if (*events) return run_events(ev);
    if (*paep) return run_paep(pa);
    if (*tube) return run_tube(tu);
    if (*restore) return run_restore(re);
    if (*eval) return run_eval(evl);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_io() ? kIoError : kValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kUsage;
}
