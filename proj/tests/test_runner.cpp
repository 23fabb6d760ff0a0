#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

#include "phonon/config.hpp"
#include "phonon/errors.hpp"
#include "phonon/runner.hpp"

using namespace phonon;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("phonon_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const Table& table(const ResultBundle& b, const std::string& name)
{
    for (const Table& t : b.tables)
        if (t.name == name)
            return t;
    throw std::runtime_error("missing table " + name);
}

} // namespace

TEST_SUITE("runner")
{
    TEST_CASE("number formatting round-trips")
    {
        for (double v : {0.1, -2.5e-9, 93.9, 1.0 / 3.0})
            CHECK(std::stod(format_number(v)) == v);
        CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
        CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
    }

    TEST_CASE("record-set CSV round-trips")
    {
        SyntheticDrift d;
        d.records = 4;
        d.noise = 0.03;
        const std::vector<TrackingRecord> recs = synthetic_records(d).records;
        const fs::path dir = scratch("records");
        write_record_set(recs, (dir / "r.csv").string());
        const std::vector<TrackingRecord> back = read_record_set((dir / "r.csv").string());
        REQUIRE(back.size() == recs.size());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            CHECK(back[i].id == recs[i].id);
            CHECK(back[i].tracking.detunings_mhz == recs[i].tracking.detunings_mhz);
            CHECK(back[i].tracking.response == recs[i].tracking.response);
            CHECK(back[i].data.response == recs[i].data.response);
        }
        std::ofstream(dir / "bad.csv") << "id,f,r\n1,2,3\n";
        CHECK_THROWS_AS(read_record_set((dir / "bad.csv").string()), ConfigError);
        CHECK_THROWS_AS(read_record_set((dir / "missing.csv").string()), IoError);
    }

    TEST_CASE("number-splitting bundle layout")
    {
        RunConfig c = parse_config(R"(
[truncation]
n_m = 5
[number_splitting]
voltages_v = [0.0, 0.2]
detuning_lo_mhz = -6.0
detuning_hi_mhz = 2.0
detuning_points = 5
)");
        const ResultBundle b = run("number-splitting", c, serial_fan_out());
        for (const char* name : {"spectrum_V0.0000", "spectrum_V0.2000"}) {
            const Table& t = table(b, name);
            CHECK(t.columns == std::vector<std::string>{"delta_MHz", "p_e"});
            CHECK(t.rows.size() == 5);
        }
        const Table& nb = table(b, "nbar_summary");
        CHECK(nb.rows.size() == 2);
        CHECK(b.summary["spectra"].size() == 2);
        CHECK(b.convergence.performed);
        CHECK(b.convergence.n_m_refined == 10);
        CHECK(b.convergence.n_q_refined == 4);

        const fs::path dir = scratch("bundle");
        write_bundle(b, c, dir.string());
        CHECK(fs::exists(dir / "number-splitting" / "spectrum_V0.2000.csv"));
        CHECK(fs::exists(dir / "number-splitting" / "nbar_summary.csv"));
        const nlohmann::json meta = nlohmann::json::parse(slurp(dir / "number-splitting" / "metadata.json"));
        CHECK(meta.contains("config"));
        CHECK(meta.contains("convergence"));
        CHECK(meta["config_hash"] == config_hash(c));
    }

    TEST_CASE("optimize-chi summary")
    {
        const ResultBundle b = run("optimize-chi", profile_config("tableS1"), serial_fan_out());
        CHECK(b.summary["alpha_opt_MHz"].get<double>() == doctest::Approx(120.0).epsilon(10.0 / 120.0));
        CHECK_FALSE(b.convergence.performed);
    }

    TEST_CASE("t1 convergence report")
    {
        const ResultBundle b = run("t1", profile_config("tableS1"), serial_fan_out());
        CHECK(b.convergence.performed);
        CHECK(b.convergence.passed());
        CHECK(b.summary["t1_fit_us"].get<double>() == doctest::Approx(1.14).epsilon(0.01));
    }

    TEST_CASE("driftfix is deterministic for a seed")
    {
        RunConfig c = profile_config("tableS1");
        c.seed = 5;
        const ResultBundle a = run("driftfix", c, serial_fan_out());
        const ResultBundle b = run("driftfix", c, thread_fan_out(4));
        CHECK(a.summary == b.summary);
        const fs::path d1 = scratch("det1"), d2 = scratch("det2");
        write_bundle(a, c, d1.string());
        write_bundle(b, c, d2.string());
        for (const char* f : {"offsets.csv", "tracking_average.csv", "data_average.csv", "records.csv"})
            CHECK(slurp(d1 / "driftfix" / f) == slurp(d2 / "driftfix" / f));
        CHECK(a.summary["width_after_MHz"].get<double>() < a.summary["width_before_MHz"].get<double>());
        c.seed = 6;
        CHECK(run("driftfix", c, serial_fan_out()).summary != a.summary);
    }

    TEST_CASE("parallel sweeps match serial ones")
    {
        RunConfig c = parse_config(R"(
[run]
convergence_check = false
[truncation]
n_m = 5
[number_splitting]
voltages_v = [0.1, 0.2]
detuning_points = 4
)");
        const ResultBundle a = run("number-splitting", c, serial_fan_out());
        const ResultBundle b = run("number-splitting", c, thread_fan_out(3));
        CHECK(table(a, "spectrum_V0.2000").rows == table(b, "spectrum_V0.2000").rows);
        CHECK(table(a, "nbar_summary").rows == table(b, "nbar_summary").rows);
    }

    TEST_CASE("unknown subcommand")
    {
        CHECK_THROWS_AS(run("plot", profile_config("tableS1"), serial_fan_out()), ConfigError);
    }
}
