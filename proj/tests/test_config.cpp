// SPDX-License-Identifier: Apache-2.0
//
// Configuration parsing, the CLI commands, and end-to-end artifact checks.

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "psdg/runner.hpp"

using namespace psdg;

namespace {

std::string tmp_path(const std::string& name) {
    return std::string(::testing::TempDir()) + "/" + name;
}

std::string write_file(const std::string& name, const std::string& text) {
    const std::string path = tmp_path(name);
    std::ofstream out(path);
    EXPECT_TRUE(out.good()) << path;
    out << text;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    EXPECT_TRUE(in.good()) << path;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool file_exists(const std::string& path) { return std::ifstream(path).good(); }

RunConfig parse_text(const std::string& name, const std::string& text) {
    return parse_config(write_file(name, text));
}

void expect_config_error(const std::string& name, const std::string& text,
                         const std::string& needle) {
    try {
        parse_text(name, text);
        FAIL() << "expected ConfigError containing '" << needle << "'";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
}

} // namespace

TEST(IniParse, SectionsKeysCommentsAndErrors) {
    const RunConfig rc = parse_text("ok.ini",
                                    "# full-line comment\n"
                                    "[scenario]\n"
                                    "name = manufactured_sine\n"
                                    "  mu   =  2.5  \n"
                                    "; another comment\n"
                                    "[time]\n"
                                    "theta = 1.0\n"
                                    "dt = 0.05\n"
                                    "T = 0.25\n");
    EXPECT_EQ(rc.scenario.name, "manufactured_sine");
    EXPECT_DOUBLE_EQ(rc.scenario.mu, 2.5);
    EXPECT_DOUBLE_EQ(rc.theta, 1.0);
    EXPECT_DOUBLE_EQ(rc.dt, 0.05);

    expect_config_error("noeq.ini", "[scenario]\nname manufactured_sine\n", "expected 'key = value'");
    expect_config_error("badsec.ini", "[scenario\nname = cylinder\n", "malformed section header");
    expect_config_error("emptyval.ini", "[scenario]\nname =\n", "empty value for key 'name'");
    expect_config_error("dup.ini", "[time]\ndt = 0.1\ndt = 0.2\nT = 1\n", "duplicate key 'dt'");
    try {
        parse_config("/no/such/psdg_config.ini");
        FAIL() << "expected unreadable config to throw";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("cannot open"), std::string::npos) << e.what();
    }
}

TEST(IniParse, DuplicateKeyNamesBothLines) {
    try {
        parse_text("dup2.ini", "[time]\ndt = 0.1\n# x\ndt = 0.2\n");
        FAIL() << "expected duplicate-key error";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find(":4:"), std::string::npos) << msg;
        EXPECT_NE(msg.find("first set at line 2"), std::string::npos) << msg;
    }
}

TEST(ConfigValidation, UnknownKeysAreErrorsWithLines) {
    try {
        parse_text("unknown.ini",
                   "[scenario]\nname = recovery_poly\n[space]\ndegre = 2\n[solver]\nmethd = cg\n");
        FAIL() << "expected unknown-key error";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("unknown key 'degre' in section [space]"), std::string::npos) << msg;
        EXPECT_NE(msg.find(":4:"), std::string::npos) << msg;
        EXPECT_NE(msg.find("unknown key 'methd' in section [solver]"), std::string::npos) << msg;
    }
}

TEST(ConfigValidation, RangeAndGridChecks) {
    expect_config_error("theta.ini", "[time]\ntheta = 1.5\ndt = 0.01\nT = 1\n",
                        "theta must lie in [0, 1]");
    expect_config_error("grid.ini", "[time]\ntheta = 0.5\ndt = 0.3\nT = 1.0\n",
                        "T not an integer multiple of dt");
    expect_config_error("mu.ini", "[scenario]\nmu = -1\n", "viscosity mu must be positive");
    expect_config_error("deg.ini", "[space]\ndegree = 0\n", "degree must be at least 1");
    expect_config_error("alpha.ini", "[penalty]\nalpha = 0\n", "alpha must be positive");
    expect_config_error("tol.ini", "[solver]\ntol = 2\n", "tolerance must lie in (0, 1)");
    expect_config_error("method.ini", "[solver]\nmethod = lu\n", "expected cg, dense_cholesky");
    expect_config_error("scen.ini", "[scenario]\nname = vortex\n", "scenario must be");
    expect_config_error("meshsrc.ini", "[mesh]\nsource = download\n",
                        "mesh source must be generate or file");
    expect_config_error("meshn.ini", "[mesh]\nn = 2\n", "element count must be at least 4");
    expect_config_error("vtk.ini", "[output]\nvtk_every = 5\n", "requires recovery = true");
    expect_config_error("badnum.ini", "[time]\ndt = fast\nT = 1\n", "expected a number, got 'fast'");
    // The file source requires a path.
    expect_config_error("nopath.ini", "[mesh]\nsource = file\n", "missing required key 'path'");
}

TEST(ConfigValidation, PaperParameterSetParses) {
    const RunConfig rc = parse_text("sine.ini",
                                    "[scenario]\n"
                                    "name = manufactured_sine\n"
                                    "mu = 1.0\n"
                                    "[mesh]\n"
                                    "n = 100\n"
                                    "seed = 7\n"
                                    "[space]\n"
                                    "degree = 2\n"
                                    "[time]\n"
                                    "theta = 0.5\n"
                                    "dt = 1e-3\n"
                                    "T = 0.25\n"
                                    "[solver]\n"
                                    "method = sparse_cholesky\n"
                                    "[output]\n"
                                    "directory = out_sine\n"
                                    "errors = true\n");
    EXPECT_EQ(rc.mesh.n, 100);
    EXPECT_EQ(rc.mesh.seed, 7u);
    EXPECT_EQ(rc.degree, 2);
    EXPECT_DOUBLE_EQ(rc.theta, 0.5);
    EXPECT_DOUBLE_EQ(rc.dt, 1e-3);
    EXPECT_DOUBLE_EQ(rc.T, 0.25);
    EXPECT_EQ(rc.solver.method, SolveMethod::SparseCholesky);
    EXPECT_TRUE(rc.output.errors);
    EXPECT_FALSE(rc.output.recovery);
}

TEST(ConfigValidation, CustomScenarioPolynomials) {
    const RunConfig rc = parse_text("custom.ini",
                                    "[scenario]\n"
                                    "name = custom\n"
                                    "mu = 1.4\n"
                                    "sigma_xx = 1.0 2 0 1; -0.5 0 1 0\n"
                                    "sigma_xy = 2.0 1 1 0\n"
                                    "side_bottom = neumann\n"
                                    "side_left = neumann\n"
                                    "[time]\n"
                                    "dt = 0.1\n"
                                    "T = 0.2\n");
    const CustomScenarioSpec& cs = rc.scenario.custom;
    EXPECT_DOUBLE_EQ(cs.mu, 1.4);
    ASSERT_EQ(cs.sigma[0].size(), 2u);
    EXPECT_DOUBLE_EQ(cs.sigma[0][0].c, 1.0);
    EXPECT_EQ(cs.sigma[0][0].i, 2);
    EXPECT_EQ(cs.sigma[0][0].k, 1);
    EXPECT_DOUBLE_EQ(cs.sigma[0][1].c, -0.5);
    ASSERT_EQ(cs.sigma[1].size(), 1u);
    EXPECT_TRUE(cs.sigma[2].empty());
    EXPECT_EQ(cs.sides[0], FaceKind::Neumann);
    EXPECT_EQ(cs.sides[1], FaceKind::Dirichlet);
    EXPECT_EQ(cs.sides[3], FaceKind::Neumann);

    // The scenario factory accepts the parsed spec.
    const Scenario scn = make_scenario(rc.scenario);
    EXPECT_EQ(scn.name, "custom");
    EXPECT_DOUBLE_EQ(scn.mu, 1.4);
    EXPECT_TRUE(scn.has_exact());

    expect_config_error("badterm.ini",
                        "[scenario]\nname = custom\nsigma_xx = 1.0 2 0\n",
                        "each term must be 'coeff i j k'");
    expect_config_error("badside.ini",
                        "[scenario]\nname = custom\nside_top = robin\n",
                        "expected 'dirichlet' or 'neumann'");
}

TEST(Runner, MeshGenRoundTrip) {
    const std::string mesh_path = tmp_path("gen_mesh.txt");
    const RunConfig gen = parse_text("gen.ini",
                                     "[scenario]\nname = recovery_poly\n"
                                     "[mesh]\nn = 24\niters = 20\nseed = 3\noutput = " +
                                         mesh_path + "\n");
    cmd_mesh_gen(gen);
    ASSERT_TRUE(file_exists(mesh_path));

    // Run from the saved file and from the generator: same mesh, same result.
    const std::string common = "[scenario]\nname = recovery_poly\n"
                               "[space]\ndegree = 1\n"
                               "[time]\ntheta = 0.5\ndt = 0.05\nT = 0.2\n"
                               "[solver]\nmethod = dense_cholesky\n";
    const RunConfig from_file =
        parse_text("fromfile.ini", common +
                                       "[mesh]\nsource = file\npath = " + mesh_path +
                                       "\n[output]\ndirectory = " + tmp_path("out_file") +
                                       "\nerrors = true\n");
    const RunConfig from_gen =
        parse_text("fromgen.ini", common +
                                      "[mesh]\nn = 24\niters = 20\nseed = 3\n"
                                      "[output]\ndirectory = " +
                                      tmp_path("out_gen") + "\nerrors = true\n");
    const PointOutcome a = cmd_run(from_file);
    const PointOutcome b = cmd_run(from_gen);
    EXPECT_EQ(a.mesh_elements, b.mesh_elements);
    EXPECT_EQ(a.dofs, b.dofs);
    ASSERT_TRUE(a.has_errors);
    ASSERT_TRUE(b.has_errors);
    // Same discrete problem either way; Crank-Nicolson reproduces the
    // polynomial solution, so both errors sit at roundoff.
    EXPECT_LE(a.errors.err_energy, 1e-8);
    EXPECT_LE(b.errors.err_energy, 1e-8);

    try {
        cmd_mesh_gen(parse_text("genfile.ini",
                                "[mesh]\nsource = file\npath = x.txt\noutput = y.txt\n"));
        FAIL() << "expected mesh-gen to reject file sources";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("source = generate"), std::string::npos);
    }
    try {
        cmd_mesh_gen(parse_text("noout.ini", "[mesh]\nn = 24\n"));
        FAIL() << "expected missing-output error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("[mesh] output"), std::string::npos);
    }
}

TEST(Runner, RunWritesArtifactsAndMetadata) {
    const std::string dir = tmp_path("out_run");
    const RunConfig rc = parse_text("runart.ini",
                                    "[scenario]\nname = recovery_poly\n"
                                    "[mesh]\nn = 20\nseed = 5\n"
                                    "[space]\ndegree = 1\n"
                                    "[time]\ntheta = 0.5\ndt = 0.05\nT = 0.2\n"
                                    "[solver]\nmethod = dense_cholesky\n"
                                    "[output]\ndirectory = " +
                                        dir +
                                        "\nerrors = true\nrecovery = true\nstability = true\n"
                                        "vtk_every = 2\n");
    const PointOutcome out = cmd_run(rc);
    EXPECT_TRUE(out.has_errors);
    EXPECT_TRUE(out.has_stability);
    EXPECT_TRUE(file_exists(dir + "/metadata.json"));
    EXPECT_TRUE(file_exists(dir + "/errors.csv"));
    EXPECT_TRUE(file_exists(dir + "/fields_final.vtk"));
    EXPECT_TRUE(file_exists(dir + "/fields_000000.vtk")); // snapshot at step 0
    EXPECT_TRUE(file_exists(dir + "/fields_000002.vtk"));
    EXPECT_FALSE(file_exists(dir + "/fields_000001.vtk"));
    // The final level (step 4) is covered by fields_final.vtk, not duplicated.
    EXPECT_FALSE(file_exists(dir + "/fields_000004.vtk"));

    const std::string meta = slurp(dir + "/metadata.json");
    for (const char* needle :
         {"\"name\": \"recovery_poly\"", "\"mu\": 1", "\"degree\": 1", "\"alpha\": 10",
          "\"theta\": 0.5", "\"theta_validated\": true", "\"dt\": 0.05", "\"T\": 0.2",
          "\"steps\": 4", "\"method\": \"dense_cholesky\"", "\"dofs\":", "\"wall_seconds\":",
          "\"solves\": 4", "\"err_energy\":", "\"constant\":", "\"all_finite\": true",
          "\"seed\": 5", "\"workers\": 1"})
        EXPECT_NE(meta.find(needle), std::string::npos) << needle << "\n" << meta;

    const RateTable errors = import_csv(dir + "/errors.csv");
    ASSERT_EQ(errors.rows.size(), 1u);
    EXPECT_EQ(errors.rows[0].p, 1);
    EXPECT_LE(errors.rows[0].err_energy, 1e-8);
    EXPECT_TRUE(std::isnan(errors.rows[0].rate));
}

TEST(Runner, IdenticalConfigsReproduceBitwise) {
    const std::string common = "[scenario]\nname = manufactured_sine\n"
                               "[mesh]\nn = 16\nseed = 9\n"
                               "[space]\ndegree = 1\n"
                               "[time]\ntheta = 1.0\ndt = 0.05\nT = 0.2\n"
                               "[solver]\nmethod = cg\n"
                               "[output]\nerrors = true\ndirectory = ";
    const RunConfig a = parse_text("repr_a.ini", common + tmp_path("out_repr_a") + "\n");
    const RunConfig b = parse_text("repr_b.ini", common + tmp_path("out_repr_b") + "\n");
    cmd_run(a);
    cmd_run(b);
    EXPECT_EQ(slurp(tmp_path("out_repr_a") + "/errors.csv"),
              slurp(tmp_path("out_repr_b") + "/errors.csv"));
}

TEST(Runner, ErrorsFlagNeedsExactSolution) {
    const RunConfig rc = parse_text("cylerr.ini",
                                    "[scenario]\nname = cylinder\n"
                                    "[mesh]\nn = 40\n"
                                    "[time]\ndt = 0.1\nT = 0.2\n"
                                    "[output]\nerrors = true\ndirectory = " +
                                        tmp_path("out_cyl_err") + "\n");
    try {
        cmd_run(rc);
        FAIL() << "expected missing-exact-solution error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("provides no exact solution"), std::string::npos)
            << e.what();
    }
}

TEST(Runner, ZeroDataCustomScenarioProducesZeroOutputs) {
    const std::string dir = tmp_path("out_zero");
    const RunConfig rc = parse_text("zero.ini",
                                    "[scenario]\nname = custom\n"
                                    "[mesh]\nn = 12\nseed = 2\n"
                                    "[space]\ndegree = 1\n"
                                    "[time]\ntheta = 0.5\ndt = 0.1\nT = 0.2\n"
                                    "[solver]\nmethod = dense_cholesky\n"
                                    "[output]\ndirectory = " +
                                        dir + "\nerrors = true\nrecovery = true\n");
    const PointOutcome out = cmd_run(rc);
    ASSERT_TRUE(out.has_errors);
    EXPECT_EQ(out.errors.err_energy, 0.0);
    const std::string meta = slurp(dir + "/metadata.json");
    EXPECT_NE(meta.find("\"all_finite\": true"), std::string::npos);
    // Recovered fields are identically zero.
    const std::string vtk = slurp(dir + "/fields_final.vtk");
    std::istringstream is(vtk);
    std::string line;
    bool in_pressure = false;
    while (std::getline(is, line)) {
        if (line.rfind("SCALARS pressure", 0) == 0) {
            std::getline(is, line); // LOOKUP_TABLE
            in_pressure = true;
            continue;
        }
        if (in_pressure) {
            if (line.rfind("VECTORS", 0) == 0) break;
            EXPECT_EQ(line, "0");
        }
    }
    EXPECT_TRUE(in_pressure);
}

TEST(Runner, ConvergenceSpatialSweep) {
    const std::string dir = tmp_path("out_sweep_spatial");
    const RunConfig rc = parse_text("sweep_s.ini",
                                    "[scenario]\nname = manufactured_sine\n"
                                    "[mesh]\nseed = 11\niters = 30\n"
                                    "[time]\ntheta = 1.0\ndt = 0.02\nT = 0.1\n"
                                    "[solver]\nmethod = sparse_cholesky\n"
                                    "[sweep]\ndegrees = 1\ncells = 30 60\n"
                                    "[output]\ndirectory = " +
                                        dir + "\n");
    cmd_convergence(rc, "spatial");
    ASSERT_TRUE(file_exists(dir + "/rates.csv"));
    ASSERT_TRUE(file_exists(dir + "/rates.dat"));
    ASSERT_TRUE(file_exists(dir + "/sweep.json"));
    ASSERT_TRUE(file_exists(dir + "/p1_n30/metadata.json"));
    ASSERT_TRUE(file_exists(dir + "/p1_n60/errors.csv"));

    const RateTable table = import_csv(dir + "/rates.csv");
    ASSERT_EQ(table.rows.size(), 2u);
    EXPECT_TRUE(std::isnan(table.rows[0].rate));
    EXPECT_TRUE(std::isfinite(table.rows[1].rate));
    EXPECT_GT(table.rows[0].err_energy, table.rows[1].err_energy); // monotone refinement
    EXPECT_GT(table.rows[0].h, table.rows[1].h);

    const std::string dat = slurp(dir + "/rates.dat");
    EXPECT_NE(dat.find("# degree p = 1"), std::string::npos);
    EXPECT_NE(dat.find("# h err_energy err_dev_max err_div"), std::string::npos);

    const std::string sj = slurp(dir + "/sweep.json");
    EXPECT_NE(sj.find("\"points_failed\": 0"), std::string::npos) << sj;
    EXPECT_NE(sj.find("\"mode\": \"spatial\""), std::string::npos);

    // Fewer than 2 mesh sizes is a configuration error.
    const RunConfig bad = parse_text("sweep_bad.ini",
                                     "[scenario]\nname = manufactured_sine\n"
                                     "[time]\ndt = 0.02\nT = 0.1\n"
                                     "[sweep]\ndegrees = 1\ncells = 30\n"
                                     "[output]\ndirectory = " +
                                         tmp_path("out_sweep_bad") + "\n");
    EXPECT_THROW(cmd_convergence(bad, "spatial"), ConfigError);
    EXPECT_THROW(cmd_convergence(rc, "sideways"), ConfigError);
}

TEST(Runner, ConvergenceTemporalSweepRecordsPerPointFailures) {
    const std::string dir = tmp_path("out_sweep_temporal");
    // 0.03 does not divide T = 0.1: that point fails at run time, the sweep
    // continues, the good points produce the table, and the command reports a
    // nonzero outcome at the end.
    const RunConfig rc = parse_text("sweep_t.ini",
                                    "[scenario]\nname = recovery_poly\n"
                                    "[mesh]\nn = 16\nseed = 4\n"
                                    "[space]\ndegree = 1\n"
                                    "[time]\ntheta = 1.0\ndt = 0.01\nT = 0.1\n"
                                    "[solver]\nmethod = dense_cholesky\n"
                                    "[sweep]\ndts = 0.05 0.03 0.025\n"
                                    "[output]\ndirectory = " +
                                        dir + "\n");
    try {
        cmd_convergence(rc, "temporal");
        FAIL() << "expected the sweep to report the failed point";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("1 sweep point(s) failed"), std::string::npos) << msg;
        EXPECT_NE(msg.find("dt0.03"), std::string::npos) << msg;
    }
    // The surviving points still produced the artifacts.
    ASSERT_TRUE(file_exists(dir + "/rates.csv"));
    const RateTable table = import_csv(dir + "/rates.csv");
    ASSERT_EQ(table.rows.size(), 2u);
    EXPECT_DOUBLE_EQ(table.rows[0].dt, 0.05);
    EXPECT_DOUBLE_EQ(table.rows[1].dt, 0.025);
    const std::string sj = slurp(dir + "/sweep.json");
    EXPECT_NE(sj.find("\"points_failed\": 1"), std::string::npos) << sj;
    EXPECT_NE(sj.find("integer multiple"), std::string::npos) << sj;
}

TEST(Cli, ArgumentHandlingAndExitCodes) {
    auto run_cli = [](std::vector<std::string> args) {
        std::vector<const char*> argv = {"psdg"};
        for (const std::string& a : args) argv.push_back(a.c_str());
        return cli_main(static_cast<int>(argv.size()), argv.data());
    };
    EXPECT_EQ(run_cli({"--help"}), 0);
    EXPECT_EQ(run_cli({}), 1);
    EXPECT_EQ(run_cli({"explode"}), 1);
    EXPECT_EQ(run_cli({"run"}), 1);                                   // missing --config
    EXPECT_EQ(run_cli({"run", "--config", "/no/such/file.ini"}), 1);  // unreadable config
    EXPECT_EQ(run_cli({"run", "--config", "x.ini", "--frobnicate"}), 1);

    const std::string cfg = write_file("cli_run.ini",
                                       "[scenario]\nname = recovery_poly\n"
                                       "[mesh]\nn = 12\nseed = 2\n"
                                       "[time]\ntheta = 0.5\ndt = 0.1\nT = 0.2\n"
                                       "[solver]\nmethod = dense_cholesky\n"
                                       "[output]\nerrors = true\ndirectory = " +
                                           tmp_path("out_cli") + "\n");
    EXPECT_EQ(run_cli({"run", "--config", cfg}), 0);
    EXPECT_EQ(run_cli({"convergence", "--config", cfg}), 1); // missing --mode
    // Config error (exit 1) vs runtime failure (exit 2): an unwritable output
    // directory is a runtime failure.
    const std::string cfg2 = write_file("cli_run2.ini",
                                        "[scenario]\nname = recovery_poly\n"
                                        "[mesh]\nn = 12\n"
                                        "[time]\ndt = 0.1\nT = 0.2\n"
                                        "[output]\ndirectory = /proc/psdg_forbidden\n");
    EXPECT_EQ(run_cli({"run", "--config", cfg2}), 2);
}

TEST(Cli, WorkerCapEnvValidation) {
    ASSERT_EQ(unsetenv("PSDG_THREADS"), 0);
    EXPECT_EQ(worker_cap(), 1);
    ASSERT_EQ(setenv("PSDG_THREADS", "4", 1), 0);
    EXPECT_EQ(worker_cap(), 4);
    ASSERT_EQ(setenv("PSDG_THREADS", "0", 1), 0);
    EXPECT_THROW(worker_cap(), ConfigError);
    ASSERT_EQ(setenv("PSDG_THREADS", "many", 1), 0);
    EXPECT_THROW(worker_cap(), ConfigError);
    ASSERT_EQ(unsetenv("PSDG_THREADS"), 0);
}
