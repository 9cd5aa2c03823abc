// Command-line front end: explore, random, classify, permcover, profile,
// replay, catalog. Exit status: 0 no bug, 1 bug found, 2 usage error.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "vbt/vbt.hpp"

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string program;
  int c = 2;
  int v = 1;
  int t = 2;
  std::uint32_t l = 0;
  int d = 2;
  double epsilon = 0.01;
  std::uint64_t seed = 1;
  int trials = 100;
  std::uint64_t max_runs = 0;
  unsigned workers = 1;
  bool prune = true;
  bool dynamic_vb = false;
  std::string array_mode = "per-element";
  std::string out;
  std::string limits = "3,3,4";
  std::string strategy = "pct";
  int n = 600;
  std::size_t sample = 100000;
  int runs = 8;
  std::string schedule_file;
};

vbt::ProgramDef load_program(const Options& o) {
  vbt::ProgramDef prog;
  const std::string& name = o.program;
  if (name.rfind("planted:", 0) == 0) {
    try {
      prog = vbt::make_planted_from_spec(name.substr(8));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  } else if (name.rfind("pctf-pair:", 0) == 0) {
    prog = vbt::programs::pctf_pair(std::stod(name.substr(10)));
  } else if (const auto* entry = vbt::find_corpus_entry(name)) {
    prog = entry->make();
  } else {
    throw UsageError("unknown program '" + name + "' (see `vbt catalog`)");
  }
  if (o.array_mode == "whole-array") {
    prog.set_array_mode(vbt::ArrayMode::WholeArray);
  } else if (o.array_mode != "per-element") {
    throw UsageError("--array-mode must be per-element or whole-array");
  }
  return prog;
}

vbt::Signature parse_limits(const std::string& s) {
  vbt::Signature sig;
  char a = 0, b = 0;
  std::istringstream in(s);
  if (!(in >> sig.c >> a >> sig.v >> b >> sig.t) || a != ',' || b != ',') {
    throw UsageError("--limits must look like c,v,t");
  }
  return sig;
}

void echo(std::ostream& out, const std::string& command, const Options& o) {
  out << "vbt-report 1\n";
  out << "command " << command << '\n';
  if (!o.program.empty()) out << "program " << o.program << '\n';
  out << "seed " << o.seed << '\n';
}

int cmd_explore(std::ostream& out, const Options& o) {
  const auto prog = load_program(o);
  vbt::ExplorationConfig cfg;
  cfg.c_max = o.c;
  cfg.v = o.v;
  cfg.t = o.t;
  cfg.l = o.l;
  cfg.epsilon = o.epsilon;
  cfg.seed = o.seed;
  cfg.prune = o.prune;
  cfg.workers = o.workers;
  cfg.max_runs = o.max_runs;
  echo(out, "explore", o);
  out << "bounds c " << o.c << " v " << o.v << " t " << o.t << " l " << o.l << '\n';
  out << "epsilon " << o.epsilon << '\n';
  out << "prune " << (o.prune ? "on" : "off") << '\n';
  out << "variable_bounding " << (o.dynamic_vb ? "dynamic" : "subsets") << '\n';
  out << "array_mode " << o.array_mode << '\n';
  const auto report = o.dynamic_vb ? vbt::explore_dynamic_vb(prog, cfg) : vbt::explore_bounded(prog, cfg);
  vbt::write_exploration(out, prog, report);
  return report.bug_found() ? 1 : 0;
}

int cmd_random(std::ostream& out, const Options& o) {
  const auto prog = load_program(o);
  vbt::Strategy s;
  if (o.strategy == "pct") {
    s = vbt::Strategy::pct(o.d);
  } else if (o.strategy == "pctvb") {
    s = vbt::Strategy::pctvb(o.d, o.v);
  } else {
    throw UsageError("--strategy must be pct or pctvb");
  }
  const std::uint64_t max_runs = o.max_runs ? o.max_runs : 10000;
  echo(out, "random", o);
  out << "strategy " << vbt::to_string(s) << '\n';
  out << "trials " << o.trials << '\n';
  out << "max_runs " << max_runs << '\n';
  const auto profile = vbt::estimate_access_profile(prog, s.profile_runs, o.seed);
  out << "profile_steps " << profile.max_steps << '\n';
  for (const auto& [site, k] : profile.k) out << "profile_site " << prog.site_name(site) << ' ' << k << '\n';
  const auto result = vbt::executions_to_bug(prog, s, max_runs, o.trials, o.seed);
  out << "timed_out " << result.timed_out() << '\n';
  if (auto m = result.mean_found()) {
    out << "mean_executions " << *m << '\n';
  } else {
    out << "mean_executions TimedOut\n";
  }
  out << result.csv();
  return result.timed_out() < o.trials ? 1 : 0;
}

int cmd_classify(std::ostream& out, const Options& o) {
  const auto prog = load_program(o);
  const auto limits = parse_limits(o.limits);
  vbt::ClassifyOptions opt;
  opt.seed = o.seed;
  opt.epsilon = o.epsilon;
  opt.l = o.l;
  opt.workers = o.workers;
  echo(out, "classify", o);
  out << "limits " << vbt::to_string(limits) << '\n';
  const auto result = vbt::classify_bug(prog, limits, opt);
  if (!result) {
    out << "signature NotFound\n";
    return 0;
  }
  out << "signature " << vbt::to_string(result->signature) << '\n';
  out << "bug " << result->bug_id << '\n';
  out << "schedules_executed " << result->schedules_executed << '\n';
  out << vbt::serialize_schedule(result->schedule);
  return 1;
}

int cmd_permcover(std::ostream& out, const Options& o) {
  echo(out, "permcover", o);
  out << "n " << o.n << " t " << o.t << " epsilon " << o.epsilon << " sample " << o.sample << '\n';
  out << "required " << vbt::required_permutations(o.n, o.t, o.epsilon) << '\n';
  out << "trial,observed\n";
  for (int i = 0; i < o.trials; ++i) {
    const auto p = vbt::simulate_to_coverage(o.n, o.t, o.epsilon, vbt::derive_seed(o.seed, static_cast<std::uint64_t>(i)),
                                             o.sample);
    out << i << ',' << p << '\n';
  }
  return 0;
}

int cmd_profile(std::ostream& out, const Options& o) {
  const auto prog = load_program(o);
  echo(out, "profile", o);
  out << "runs " << o.runs << '\n';
  const auto prof = vbt::profile_access_frequencies(prog, o.runs, o.seed);
  for (const auto& [site, mean] : prof.mean_accesses) out << "site " << prog.site_name(site) << ' ' << mean << '\n';
  for (const auto& b : prof.buckets) {
    std::vector<std::string> names;
    for (auto s : b.sites) names.push_back(prog.site_name(s));
    out << "bucket " << b.lo << ' ' << b.hi << ' ' << b.sites.size() << ' ' << (names.empty() ? "-" : vbt::join(names, ","))
        << '\n';
  }
  const auto k = vbt::estimate_access_profile(prog, o.runs, o.seed);
  if (k.total() > 0) {
    const auto j = vbt::jensen_compare(k);
    out << "E1 " << j.e1 << "\nE2 " << j.e2 << '\n';
  }
  return 0;
}

int cmd_replay(std::ostream& out, Options o) {
  std::ifstream in(o.schedule_file);
  if (!in) throw UsageError("cannot read " + o.schedule_file);
  vbt::Schedule sched;
  try {
    sched = vbt::parse_schedule(in);
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
  if (o.program.empty()) o.program = sched.program;
  const auto prog = load_program(o);
  echo(out, "replay", o);
  const auto r = vbt::replay(prog, sched);
  out << "steps " << r.trace.size() << '\n';
  out << "c_used " << r.c_used << " v_used " << r.v_used << " t_used " << r.t_used << '\n';
  out << "outcome " << (r.buggy() ? r.bug_id() : "ok") << '\n';
  out << "trace\n" << vbt::trace_to_string(prog, r.trace) << "end\n";
  return r.buggy() ? 1 : 0;
}

int cmd_catalog(std::ostream& out) {
  out << "vbt-report 1\ncommand catalog\n";
  for (const auto& e : vbt::corpus_catalog()) {
    out << e.name << ' ' << (e.expected ? vbt::to_string(*e.expected) : "bug-free") << ' ' << e.note << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounded schedule exploration for modeled concurrent programs"};
  app.require_subcommand(1);
  Options o;

  auto bounds = [&o](CLI::App* sub) {
    sub->add_option("--c", o.c, "context bound");
    sub->add_option("--v", o.v, "variable bound");
    sub->add_option("--t", o.t, "thread bound");
    sub->add_option("--l", o.l, "loop-iteration bound");
  };
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "PRNG seed");
    sub->add_option("--epsilon", o.epsilon, "permutation coverage failure probability");
    sub->add_option("--workers", o.workers, "parallel workers");
    sub->add_option("--array-mode", o.array_mode, "per-element or whole-array");
    sub->add_option("--out", o.out, "write the report here instead of stdout");
  };

  auto* explore = app.add_subcommand("explore", "exhaustive bounded exploration");
  explore->add_option("program", o.program)->required();
  bounds(explore);
  common(explore);
  explore->add_option("--max-runs", o.max_runs, "schedule budget (0 = none)");
  explore->add_flag("--prune,!--no-prune", o.prune, "happens-before pruning");
  explore->add_flag("--dynamic-vb", o.dynamic_vb, "dynamic variable bounding");

  auto* random = app.add_subcommand("random", "PCT / PCTVB executions-to-bug campaign");
  random->add_option("program", o.program)->required();
  random->add_option("--strategy", o.strategy, "pct or pctvb");
  random->add_option("--d", o.d, "bug depth");
  random->add_option("--v", o.v, "variables for pctvb");
  random->add_option("--trials", o.trials, "independent trials");
  random->add_option("--max-runs", o.max_runs, "runs per trial before TimedOut");
  common(random);

  auto* classify = app.add_subcommand("classify", "minimal (c,v,t) of a program's bug");
  classify->add_option("program", o.program)->required();
  classify->add_option("--limits", o.limits, "c,v,t limits");
  classify->add_option("--l", o.l, "loop-iteration bound");
  common(classify);

  auto* permcover = app.add_subcommand("permcover", "random permutations until t-subset coverage");
  permcover->add_option("--n", o.n, "elements");
  permcover->add_option("--t", o.t, "subset size");
  permcover->add_option("--trials", o.trials, "repeats")->default_val(1);
  permcover->add_option("--sample", o.sample, "sampled subsets");
  common(permcover);

  auto* profile = app.add_subcommand("profile", "per-site access frequencies");
  profile->add_option("program", o.program)->required();
  profile->add_option("--runs", o.runs, "preparatory runs");
  common(profile);

  auto* replay = app.add_subcommand("replay", "re-execute a recorded schedule");
  replay->add_option("schedule", o.schedule_file, "schedule or report file")->required();
  replay->add_option("--program", o.program, "override the recorded program name");
  common(replay);

  auto* catalog = app.add_subcommand("catalog", "list corpus programs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::ostringstream body;
  const auto start = std::chrono::steady_clock::now();
  int status = 0;
  try {
    if (*explore) status = cmd_explore(body, o);
    else if (*random) status = cmd_random(body, o);
    else if (*classify) status = cmd_classify(body, o);
    else if (*permcover) status = cmd_permcover(body, o);
    else if (*profile) status = cmd_profile(body, o);
    else if (*replay) status = cmd_replay(body, o);
    else if (*catalog) status = cmd_catalog(body);
  } catch (const UsageError& e) {
    std::cerr << "vbt: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "vbt: " << e.what() << '\n';
    return 2;
  } catch (const vbt::ReplayDivergence& e) {
    std::cerr << "vbt: replay diverged: " << e.what() << '\n';
    return 2;
  } catch (const vbt::ModelError& e) {
    std::cerr << "vbt: model error: " << e.what() << '\n';
    return 2;
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  body << "timing\nelapsed_ms " << ms << '\n';

  if (o.out.empty()) {
    std::cout << body.str();
  } else {
    std::ofstream f(o.out);
    if (!f) {
      std::cerr << "vbt: cannot write " << o.out << '\n';
      return 2;
    }
    f << body.str();
  }
  return status;
}
