#include "cli_harness.hpp"
#include "doctest.h"

#include "ctxsat/io.hpp"
#include "ctxsat/milp.hpp"

using namespace ctxsat;
using cli::Scratch;
using cli::run;
using cli::slurp;

namespace {

std::string learn_manifest_core(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    j.erase("elapsed_s");
    j.erase("dataset");
    j["config"].erase("output_dir");
    j["config"]["learner"].erase("workers");
    return j.dump(1);
}

int generate_small(const Scratch& s, const std::string& dir, const std::string& seed = "3") {
    return run({"generate", "--n", "6", "--contexts", "5", "--seed", seed, "--out", s / dir}, s / (dir + "_gen"));
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("generate is reproducible") {
        Scratch s("gen");
        REQUIRE(generate_small(s, "a") == 0);
        REQUIRE(generate_small(s, "b") == 0);
        for (const char* f : {"truth.json", "dataset.jsonl"}) CHECK(slurp(s / (std::string("a/") + f)) == slurp(s / (std::string("b/") + f)));
        CHECK(cli::drop_keys(slurp(s / "a/generate.manifest.json"), {"config"}) ==
              cli::drop_keys(slurp(s / "b/generate.manifest.json"), {"config"}));
        const auto data = deserialize_dataset(slurp(s / "a/dataset.jsonl"));
        CHECK(data.n == 6);
        CHECK(data.unique_contexts().size() == 5);
        REQUIRE(generate_small(s, "c", "4") == 0);
        CHECK(slurp(s / "a/dataset.jsonl") != slurp(s / "c/dataset.jsonl"));
    }

    TEST_CASE("learn is reproducible across worker counts") {
        Scratch s("learn");
        REQUIRE(run({"generate", "--n", "7", "--contexts", "12", "--noise", "0.1", "--seed", "2", "--out", s / "d"},
                    s / "gen") == 0);
        std::vector<std::string> base = {"learn", "--data", s / "d/dataset.jsonl", "--max-steps", "400", "--seed", "9"};
        auto with = [&](const std::string& out, const std::string& workers) {
            auto a = base;
            a.insert(a.end(), {"--workers", workers, "--out", s / out});
            return run(a, s / (out + "_log"));
        };
        REQUIRE(with("w1", "1") == 0);
        REQUIRE(with("w4", "4") == 0);
        REQUIRE(with("w1b", "1") == 0);
        CHECK(slurp(s / "w1/learned.json") == slurp(s / "w4/learned.json"));
        CHECK(slurp(s / "w1/learned.json") == slurp(s / "w1b/learned.json"));
        CHECK(cli::drop_columns(slurp(s / "w1/trace.csv"), {"elapsed_ms"}) ==
              cli::drop_columns(slurp(s / "w4/trace.csv"), {"elapsed_ms"}));
        CHECK(learn_manifest_core(slurp(s / "w1/learn.manifest.json")) ==
              learn_manifest_core(slurp(s / "w4/learn.manifest.json")));
        const auto m = deserialize_model(slurp(s / "w1/learned.json"));
        CHECK(m.n() == 7);
    }

    TEST_CASE("evaluate appends one row per call") {
        Scratch s("eval");
        REQUIRE(generate_small(s, "d") == 0);
        REQUIRE(run({"learn", "--data", s / "d/dataset.jsonl", "--max-steps", "200", "--out", s / "d"}, s / "learn") == 0);
        std::vector<std::string> ev = {"evaluate", "--learned", s / "d/learned.json", "--truth", s / "d/truth.json",
                                       "--data", s / "d/dataset.jsonl", "--manifest", s / "d/learn.manifest.json",
                                       "--csv", s / "r.csv"};
        REQUIRE(run(ev, s / "e1") == 0);
        REQUIRE(run(ev, s / "e2") == 0);
        const auto csv = cli::drop_columns(slurp(s / "r.csv"), {"elapsed"});
        std::istringstream in(csv);
        std::vector<std::string> lines;
        for (std::string l; std::getline(in, l);) lines.push_back(l);
        REQUIRE(lines.size() == 3);
        CHECK(lines[0].rfind("seed,n,m_hard", 0) == 0);
        CHECK(lines[1] == lines[2]);
        CHECK(lines[1].rfind("3,6,", 0) == 0);

        // The truth against itself.
        REQUIRE(run({"evaluate", "--learned", s / "d/truth.json", "--truth", s / "d/truth.json", "--data",
                     s / "d/dataset.jsonl", "--csv", s / "self.csv"},
                    s / "e3") == 0);
        const auto self = cli::drop_columns(slurp(s / "self.csv"), {"seed", "n", "m_hard", "m_soft", "contexts",
                                                                     "strategy", "cutoff", "elapsed"});
        CHECK(self.find("1.000000,1.000000,0.000000,0.000000") != std::string::npos);
    }

    TEST_CASE("configuration precedence") {
        Scratch s("cfg");
        {
            std::ofstream(s / "c.json") << R"({"generation": {"n": 5, "context_count": 4, "seed": 8}})";
        }
        REQUIRE(run({"--config", s / "c.json", "generate", "--out", s / "a"}, s / "a") == 0);
        CHECK(deserialize_dataset(slurp(s / "a/dataset.jsonl")).n == 5);
        REQUIRE(run({"--config", s / "c.json", "generate", "--n", "6", "--out", s / "b"}, s / "b") == 0);
        const auto b = deserialize_dataset(slurp(s / "b/dataset.jsonl"));
        CHECK(b.n == 6);
        CHECK(b.unique_contexts().size() == 4);
        {
            std::ofstream(s / "bad.json") << R"({"generation": {"nn": 5}})";
        }
        CHECK(run({"--config", s / "bad.json", "generate", "--out", s / "x"}, s / "x") == 1);
    }

    TEST_CASE("exit codes") {
        Scratch s("exit");
        CHECK(run({"generate", "--noise", "0.6", "--out", s / "x"}, s / "l1") == 1);
        CHECK(run({"learn", "--data", s / "missing.jsonl"}, s / "l2") == 1);
        CHECK(run({"trends", "--suite", "bogus"}, s / "l3") == 1);
        CHECK(run({"frobnicate"}, s / "l4") == 1);
        {
            std::ofstream(s / "broken.jsonl") << "{not json\n";
        }
        CHECK(run({"learn", "--data", s / "broken.jsonl", "--out", s / "x"}, s / "l5") == 1);
        CHECK(run({"generate", "--n", "2", "--m-hard", "0", "--m-soft", "1", "--contexts", "10", "--out", s / "g"},
                  s / "l6") != 0);
        CHECK(slurp(s / "l1.err").find("noise") != std::string::npos);
    }

    TEST_CASE("encode-milp with the built-in solver and an external command") {
        Scratch s("milp");
        REQUIRE(run({"generate", "--n", "3", "--m-hard", "1", "--m-soft", "1", "--clause-len", "2", "--contexts",
                     "2", "--context-len", "2", "--pos", "1", "--neg", "1", "--seed", "4", "--out", s / "d"},
                    s / "gen") == 0);
        REQUIRE(run({"encode-milp", "--data", s / "d/dataset.jsonl", "--out", s / "p.lp", "--m", "2", "--fallback"},
                    s / "fb") == 0);
        const auto lp = milp::parse_lp(slurp(s / "p.lp"));
        CHECK(!lp.constraints.empty());
        const auto fb_model = deserialize_model(slurp(s / "p.lp.model.json"));
        CHECK(fb_model.size() == 2);

        // A "solver" that copies a precomputed solution into place.
        const auto data = deserialize_dataset(slurp(s / "d/dataset.jsonl"));
        const auto problem = milp::build_encoding(data, 2);
        const auto sol = milp::solve_exhaustive(problem);
        REQUIRE(sol.feasible);
        {
            std::ofstream out(s / "pre.sol");
            out << "# objective " << sol.objective << "\n";
            for (const auto& v : problem.variables()) out << v.name << " " << sol.solution.at(v.name) << "\n";
        }
        REQUIRE(run({"encode-milp", "--data", s / "d/dataset.jsonl", "--out", s / "q.lp", "--m", "2",
                     "--refine-rounds", "0", "--solver-cmd", "cp " + (s / "pre.sol") + " {sol}"},
                    s / "ext") == 0);
        CHECK(deserialize_model(slurp(s / "q.lp.model.json")) == milp::decode(problem, sol.solution).model);
        CHECK(run({"encode-milp", "--data", s / "d/dataset.jsonl", "--out", s / "r.lp", "--solver-cmd", "false"},
                  s / "bad") == 3);
        CHECK(run({"encode-milp", "--data", s / "d/dataset.jsonl", "--out", s / "t.lp", "--m", "5", "--fallback"},
                  s / "cap") == 1);
    }

    TEST_CASE("trends writes per-run and summary tables deterministically") {
        Scratch s("trends");
        auto go = [&](const std::string& out, const std::string& jobs) {
            return run({"trends", "--suite", "neg-type", "--n", "4", "--m-hard", "1", "--m-soft", "1", "--contexts",
                        "3", "--max-steps", "200", "--seeds", "1", "2", "--jobs", jobs, "--out", s / out},
                       s / (out + "_log"));
        };
        REQUIRE(go("a", "1") == 0);
        REQUIRE(go("b", "2") == 0);
        const auto a = slurp(s / "a/trends_neg-type.csv"), b = slurp(s / "b/trends_neg-type.csv");
        CHECK(cli::drop_columns(a, {"elapsed"}) == cli::drop_columns(b, {"elapsed"}));
        std::istringstream in(a);
        int rows = -1;
        for (std::string l; std::getline(in, l);) ++rows;
        CHECK(rows == 6);  // three levels, two seeds
        CHECK(cli::drop_columns(slurp(s / "a/trends_neg-type_summary.csv"), {"elapsed_mean"}) ==
              cli::drop_columns(slurp(s / "b/trends_neg-type_summary.csv"), {"elapsed_mean"}));
    }
}
