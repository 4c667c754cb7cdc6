#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "fvv/capture_sim.hpp"
#include "fvv/client.hpp"
#include "fvv/eval.hpp"
#include "fvv/server.hpp"

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimArgs {
  std::string out = "scene";
  std::uint64_t seed = 42;
  int cameras = 12;
  int width = 640;
  int height = 360;
  int frames = 300;
  int fps = 30;
  std::string format = "yuv420";
  double baseline = 1.0;
};

struct ServeArgs {
  fvv::PipelineConfig cfg;
  std::string input;
  bool no_pace = false;
  bool loop = false;
  bool exit_when_done = false;
  double linger = 0.0;
};

struct ClientArgs {
  std::string url = "http://127.0.0.1:8080";
  int view = 0;
  int ui_port = -1;
  std::string trajectory;
  std::string dump;
  int segments = 0;
  bool no_realtime = false;
  std::size_t buffer = 90;
  double linger = 0.0;
};

struct EvalArgs {
  std::string input = "scene";
  int stages = 1;
  int frame = 0;
  std::string out = "eval.json";
};

struct BenchArgs {
  std::string input;
  std::size_t iterations = 1000;
  int stages = 2;
  int views_per_side = 2;
  int cameras = 4;
  int width = 160;
  int height = 96;
  int distinct_frames = 30;
  int quality = 75;
  int gop = 30;
  double segment_duration = 1.0;
  std::uint64_t seed = 42;
  std::string json;
};

void add_pipeline_options(CLI::App* app, fvv::PipelineConfig& c) {
  app->add_option("--stages", c.stages, "Interpolation stages n (2^n - 1 views per gap)")->capture_default_str();
  app->add_option("--views-per-side", c.views_per_side, "Quarter tiles on each side of an anchor")
      ->capture_default_str();
  app->add_option("--fps", c.fps, "Frame rate")->capture_default_str();
  app->add_option("--segment-duration", c.segment_duration, "Seconds per segment")->capture_default_str();
  app->add_option("--gop", c.gop, "Frames per GOP; must divide fps * segment duration")->capture_default_str();
  app->add_option("--quality", c.quality, "Codec quality 0..100 (100 is lossless)")->capture_default_str();
  app->add_option("--capacity", c.channel_capacity, "Packs buffered per stage channel")->capture_default_str();
  app->add_option("--window", c.playlist_window, "Segments listed per live playlist")->capture_default_str();
}

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

int run_sim(const SimArgs& a) {
  auto scene = fvv::make_default_scene(a.seed, a.width, a.height, a.cameras, fvv::parse_pixel_format(a.format), a.fps);
  scene.baseline = a.baseline;
  fvv::capture_sequence(scene, a.frames, a.out);
  std::printf("captured %d cameras x %d frames (%dx%d %s) into %s\n", a.cameras, a.frames, a.width, a.height,
              a.format.c_str(), a.out.c_str());
  return 0;
}

int run_serve(ServeArgs a) {
  a.cfg.input = a.input;
  a.cfg.live = !a.no_pace;
  a.cfg.validate();
  auto source = fvv::open_scene_source(a.cfg.input, a.loop);
  fvv::Pipeline pipeline(a.cfg, source);
  fvv::EdgeHttpServer http(pipeline);
  const int port = http.start(a.cfg.host, a.cfg.port);
  std::printf("listening on http://%s:%d (%d clusters, %d views)\n", a.cfg.host.c_str(), port,
              static_cast<int>(pipeline.layouts().size()), pipeline.model().total_views());
  std::fflush(stdout);
  pipeline.start();

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  bool announced = false;
  auto ended_at = fvv::Clock::now();
  while (!g_interrupted) {
    if (pipeline.finished() && !announced) {
      announced = true;
      ended_at = fvv::Clock::now();
      std::printf("stream ended after %lld frames, %llu segments per cluster\n",
                  static_cast<long long>(pipeline.frames_published()),
                  static_cast<unsigned long long>(pipeline.store().published(0)));
      std::fflush(stdout);
    }
    if (announced && a.exit_when_done &&
        std::chrono::duration<double>(fvv::Clock::now() - ended_at).count() >= a.linger) {
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  pipeline.stop();
  http.stop();
  pipeline.wait();
  return 0;
}

int run_client(const ClientArgs& a) {
  fvv::ClientConfig cfg;
  cfg.url = a.url;
  cfg.view = a.view;
  if (!a.trajectory.empty()) cfg.trajectory = fvv::Trajectory::load(a.trajectory);
  cfg.dump_dir = a.dump;
  cfg.max_segments = a.segments;
  cfg.realtime = !a.no_realtime;
  cfg.buffer_frames = a.buffer;
  fvv::FvvClient client(cfg);
  client.connect();
  std::unique_ptr<fvv::ClientUiServer> ui;
  if (a.ui_port >= 0) {
    ui = std::make_unique<fvv::ClientUiServer>(client);
    const int port = ui->start("127.0.0.1", a.ui_port);
    std::printf("ui bridge on http://127.0.0.1:%d\n", port);
    std::fflush(stdout);
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread watcher([&] {
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    client.stop();
  });
  try {
    client.run();
  } catch (...) {
    g_interrupted = true;
    watcher.join();
    throw;
  }
  const auto until = fvv::Clock::now() + std::chrono::duration_cast<fvv::Clock::duration>(
                                             std::chrono::duration<double>(a.linger));
  while (ui && !g_interrupted && fvv::Clock::now() < until) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  g_interrupted = true;
  watcher.join();
  std::printf("%s\n", client.state().dump().c_str());
  return 0;
}

int run_eval(const EvalArgs& a) {
  const auto report = fvv::evaluate_scene(a.input, a.stages, a.frame);
  const auto doc = report.to_json();
  std::ofstream out(a.out);
  out << doc.dump(2) << "\n";
  if (!out) throw fvv::IoError("cannot write " + a.out);
  std::printf("%zu rows, mean psnr %s dB, mean ssim %.4f -> %s\n", report.rows.size(),
              doc["aggregate"]["psnr"].dump().c_str(), doc["aggregate"]["ssim"].get<double>(), a.out.c_str());
  return 0;
}

int run_bench(const BenchArgs& a) {
  fvv::PipelineConfig cfg;
  cfg.stages = a.stages;
  cfg.views_per_side = a.views_per_side;
  cfg.quality = a.quality;
  cfg.gop = a.gop;
  cfg.segment_duration = a.segment_duration;
  std::shared_ptr<fvv::FrameSource> source;
  if (!a.input.empty()) {
    source = fvv::open_scene_source(a.input, true);
    cfg.fps = source->format().fps;
  } else {
    const auto scene = fvv::make_default_scene(a.seed, a.width, a.height, a.cameras);
    cfg.fps = scene.fps;
    const fvv::SceneRenderer renderer(scene);
    std::vector<std::vector<fvv::Frame>> ticks;
    for (int t = 0; t < a.distinct_frames; ++t) {
      std::vector<fvv::Frame> cams;
      for (int c = 0; c < a.cameras; ++c) cams.push_back(renderer.render(c, t));
      ticks.push_back(std::move(cams));
    }
    source = fvv::memory_source(std::move(ticks), cfg.fps, true);
  }
  const auto report = fvv::bench(cfg, source, a.iterations);
  std::printf("%s", report.table().c_str());
  if (!a.json.empty()) {
    std::ofstream out(a.json);
    out << report.to_json().dump(2) << "\n";
    if (!out) throw fvv::IoError("cannot write " + a.json);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-viewpoint video: capture simulator, edge server, client and tools"};
  app.set_config("--config", "", "key=value config file; [sim] [serve] [client] [eval] [bench] sections");
  app.require_subcommand(1);

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("sim", "Render a synthetic multi-camera capture to disk");
  sim_cmd->add_option("--out", sim.out, "Output scene directory")->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed)->capture_default_str();
  sim_cmd->add_option("--cameras", sim.cameras)->capture_default_str();
  sim_cmd->add_option("--width", sim.width)->capture_default_str();
  sim_cmd->add_option("--height", sim.height)->capture_default_str();
  sim_cmd->add_option("--frames", sim.frames)->capture_default_str();
  sim_cmd->add_option("--fps", sim.fps)->capture_default_str();
  sim_cmd->add_option("--format", sim.format, "gray8 | yuv420 | rgb8")->capture_default_str();
  sim_cmd->add_option("--baseline", sim.baseline, "Camera spacing; 0 gives identical cameras")->capture_default_str();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the live pipeline and HTTP server");
  serve_cmd->add_option("--input", serve.input, "Captured scene directory")->required();
  add_pipeline_options(serve_cmd, serve.cfg);
  serve_cmd->add_option("--host", serve.cfg.host)->capture_default_str();
  serve_cmd->add_option("--port", serve.cfg.port, "0 picks a free port")->capture_default_str();
  serve_cmd->add_option("--frames", serve.cfg.max_frames, "Stop after this many frames (0: whole scene)")
      ->capture_default_str();
  serve_cmd->add_flag("--no-pace", serve.no_pace, "Process as fast as possible instead of at fps");
  serve_cmd->add_flag("--loop", serve.loop, "Replay the scene forever");
  serve_cmd->add_flag("--exit-when-done", serve.exit_when_done, "Exit once the stream has ended");
  serve_cmd->add_option("--linger", serve.linger, "Seconds to keep serving after the end (with --exit-when-done)")
      ->capture_default_str();

  ClientArgs client;
  auto* client_cmd = app.add_subcommand("client", "Play the stream, switching views locally");
  client_cmd->add_option("--url", client.url)->capture_default_str();
  client_cmd->add_option("--view", client.view, "Initial global view index")->capture_default_str();
  client_cmd->add_option("--ui-port", client.ui_port, "Serve /frame, /state, /view on this port (0: any)");
  client_cmd->add_option("--trajectory", client.trajectory, "File of '<frame_index> <view_index>' lines");
  client_cmd->add_option("--dump", client.dump, "Write displayed frames and transcript.jsonl here");
  client_cmd->add_option("--segments", client.segments, "Stop after this many segments (0: until the end)")
      ->capture_default_str();
  client_cmd->add_flag("--no-realtime", client.no_realtime, "Do not pace display at the stream frame rate");
  client_cmd->add_option("--buffer", client.buffer, "Decoded frame ring size")->capture_default_str();
  client_cmd->add_option("--linger", client.linger, "Seconds to keep the UI bridge up after playback")
      ->capture_default_str();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score interpolated views against rendered ground truth");
  eval_cmd->add_option("--input", eval.input, "Captured scene directory")->capture_default_str();
  eval_cmd->add_option("--stages", eval.stages)->capture_default_str();
  eval_cmd->add_option("--frame", eval.frame)->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Report path")->capture_default_str();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Headless per-stage latency report");
  bench_cmd->add_option("--input", bench.input, "Captured scene (default: in-memory synthetic scene)");
  bench_cmd->add_option("--iterations", bench.iterations)->capture_default_str();
  bench_cmd->add_option("--stages", bench.stages)->capture_default_str();
  bench_cmd->add_option("--views-per-side", bench.views_per_side)->capture_default_str();
  bench_cmd->add_option("--cameras", bench.cameras)->capture_default_str();
  bench_cmd->add_option("--width", bench.width)->capture_default_str();
  bench_cmd->add_option("--height", bench.height)->capture_default_str();
  bench_cmd->add_option("--distinct-frames", bench.distinct_frames, "Synthetic frames rendered, then looped")
      ->capture_default_str();
  bench_cmd->add_option("--quality", bench.quality)->capture_default_str();
  bench_cmd->add_option("--gop", bench.gop)->capture_default_str();
  bench_cmd->add_option("--segment-duration", bench.segment_duration)->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed)->capture_default_str();
  bench_cmd->add_option("--json", bench.json, "Also write the report as JSON");

  for (auto* sub : {sim_cmd, serve_cmd, client_cmd, eval_cmd, bench_cmd}) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim_cmd) return run_sim(sim);
    if (*serve_cmd) return run_serve(serve);
    if (*client_cmd) return run_client(client);
    if (*eval_cmd) return run_eval(eval);
    if (*bench_cmd) return run_bench(bench);
  } catch (const fvv::ConfigError& e) {
    std::fprintf(stderr, "fvv: configuration error: %s\n", e.what());
    return 2;
  } catch (const fvv::GopAlignmentError& e) {
    std::fprintf(stderr, "fvv: configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fvv: %s\n", e.what());
    return 1;
  }
  return 2;
}
