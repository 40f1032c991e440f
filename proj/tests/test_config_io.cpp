// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "smp/io.hpp"
#include "support.hpp"

using namespace smp;
using namespace smp::test;
using nlohmann::json;

namespace {

json preset_json()
{
    std::ifstream in(preset("verify45.json"));
    return json::parse(in);
}

std::string parse_error(const json& j)
{
    try {
        parse_config_text(j.dump());
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("shipped preset")
{
    const Problem pb = parse_config(preset("verify45.json"));
    CHECK(pb.nx == 15);
    CHECK(pb.ny == 3);
    CHECK(pb.mesh.num_elements() == 45);
    CHECK(pb.bc.load.fx == 0.025);
    for (double r : pb.rho) CHECK(r == 0.3);
    CHECK(pb.schedule.size() == 8);  // the relax step repeats twice
    CHECK(pb.schedule.steps[4].phase == "relax");
    CHECK(pb.objective.step == 4);
    CHECK(pb.objective.dof == 2 * pb.mesh.node_id(15, 3) + 1);
    CHECK(pb.verify.precision == FdPrecision::quad);
    CHECK(pb.optimize.seed == 7);
    CHECK(pb.out_dir == "out/verify45");
}

TEST_CASE("defaults are recorded")
{
    json j = preset_json();
    j.erase("verify");
    j["mesh"].erase("thickness");
    const Problem pb = parse_config_text(j.dump());
    auto has = [&](const std::string& key) {
        for (const auto& d : pb.defaults_applied)
            if (d.rfind(key + " = ", 0) == 0) return true;
        return false;
    };
    CHECK(has("verify.h"));
    CHECK(has("verify.gate"));
    CHECK(has("mesh.thickness"));
    CHECK_FALSE(has("mesh.nx"));
}

TEST_CASE("schema violations name the key")
{
    json j = preset_json();
    j["mesh"]["nx"] = "fifteen";
    CHECK(parse_error(j).find("mesh.nx") != std::string::npos);

    j = preset_json();
    j["mesh"]["colour"] = 1;
    CHECK(parse_error(j).find("mesh.colour") != std::string::npos);

    j = preset_json();
    j["material"]["lo"]["glassy"].erase("E_eq");
    CHECK(parse_error(j).find("material.lo.glassy.E_eq") != std::string::npos);

    j = preset_json();
    j["solver"]["coupling"] = "fast";
    CHECK(parse_error(j).find("solver.coupling") != std::string::npos);

    j = preset_json();
    j["schedule"]["steps"][0]["dt"] = -1.0;
    CHECK_FALSE(parse_error(j).empty());
}

TEST_CASE("cross-references are checked before any compute")
{
    json j = preset_json();
    j["objective"]["step"] = 9;
    const std::string step = parse_error(j);
    CHECK(step.find("objective.step") != std::string::npos);
    CHECK(step.find("schedule.steps") != std::string::npos);

    j = preset_json();
    j["objective"]["node"] = json::array({16, 0});
    CHECK(parse_error(j).find("objective.node") != std::string::npos);

    j = preset_json();
    j["objective"]["node"] = json::array({0, 1});
    CHECK(parse_error(j).find("fixed") != std::string::npos);

    j = preset_json();
    j["solver"]["coupling"] = "recursive";
    j["solver"]["recursion_cap"] = 3;
    CHECK(parse_error(j).find("recursion_cap") != std::string::npos);

    j = preset_json();
    j["design"]["rho0"] = 1.5;
    CHECK(parse_error(j).find("design.rho0") != std::string::npos);
}

TEST_CASE("unreadable and empty files")
{
    CHECK_THROWS_AS(parse_config("/nonexistent/config.json"), ConfigError);
    const auto path = std::filesystem::temp_directory_path() / "smp_empty_config.json";
    std::ofstream(path) << "  \n";
    CHECK_THROWS_AS(parse_config(path.string()), ConfigError);
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(parse_config(path.string()), ConfigError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(parse_config_text("[]"), ConfigError);
}

TEST_CASE("schedule repetition and cycling")
{
    Schedule s;
    s.steps = {{1.0, 350.0, 1.0, "cool"}, {2.0, 300.0, 0.0, "relax"}};
    const Schedule c = s.cycled(5);
    REQUIRE(c.size() == 5);
    CHECK(c.steps[2].T == 350.0);
    CHECK(c.steps[4].dt == 1.0);
    CHECK(c.T_before(1) == 350.0);
    Schedule bad;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("round-trip number formatting")
{
    for (double v : {0.1, -0.0086485402254963192, 1e-300, 123456789.123456789}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("CSV escaping")
{
    CHECK(CsvWriter::escape("plain") == "plain");
    CHECK(CsvWriter::escape("a,b") == "\"a,b\"");
    CHECK(CsvWriter::escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(CsvWriter::escape("two\nlines") == "\"two\nlines\"");
    CsvWriter w({"x", "y"});
    w.row({"1", "a,b"});
    CHECK(w.str() == "x,y\r\n1,\"a,b\"\r\n");
    CHECK_THROWS(w.row({"only one"}));
}

TEST_CASE("legacy VTK layout")
{
    const Mesh m = build_mesh(2, 1, 2.0, 1.0, {});
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m.num_dofs);
    const std::string vtk = vtk_legacy(m, {{"density", {0.3, 0.7}}}, {{"displacement", u}}, "demo");
    CHECK(vtk.rfind("# vtk DataFile Version", 0) == 0);
    CHECK(vtk.find("POINTS 6") != std::string::npos);
    CHECK(vtk.find("CELLS 2 10") != std::string::npos);
    CHECK(vtk.find("CELL_TYPES 2") != std::string::npos);
    CHECK(vtk.find("SCALARS density") != std::string::npos);
    CHECK(vtk.find("VECTORS displacement") != std::string::npos);
}

TEST_CASE("file output and checksums")
{
    const auto dir = std::filesystem::temp_directory_path() / "smp_io_test" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    write_text((dir / "a.txt").string(), "hello");
    std::ifstream in(dir / "a.txt");
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == "hello");
    std::filesystem::remove_all(dir.parent_path());

    CHECK(checksum("") == "cbf29ce484222325");
    CHECK(checksum("a") == "af63dc4c8601ec8c");
    CHECK(checksum("hello").size() == 16);
}
