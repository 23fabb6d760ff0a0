#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <doctest.h>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(PHONON_SIM_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("exit codes")
    {
        const fs::path dir = fs::temp_directory_path() / "phonon_test_cli";
        fs::remove_all(dir);
        fs::create_directories(dir);

        CHECK(run_cli("--version") == 0);
        CHECK(run_cli("") != 0);
        CHECK(run_cli("bogus") == 2);
        CHECK(run_cli("--profile nope t1") == 2);

        std::ofstream(dir / "bad.toml") << "[device]\nkappa_khz = -5.0\n";
        CHECK(run_cli("--config " + (dir / "bad.toml").string() + " t1") == 2);
        std::ofstream(dir / "typo.toml") << "[devise]\ng_mhz = 1.0\n";
        CHECK(run_cli("--config " + (dir / "typo.toml").string() + " t1") == 2);

        std::ofstream(dir / "missing.toml") << "[driftfix]\nrecords_path = \"/nonexistent/records.csv\"\n";
        CHECK(run_cli("--config " + (dir / "missing.toml").string() + " --out " + dir.string() + " driftfix") == 4);

        CHECK(run_cli("--out " + dir.string() + " --threads 2 --seed 3 optimize-chi") == 0);
        CHECK(fs::exists(dir / "optimize-chi" / "optimum.csv"));
        CHECK(fs::exists(dir / "optimize-chi" / "metadata.json"));
        CHECK(run_cli("--out " + dir.string() + " --seed 3 driftfix") == 0);
        CHECK(fs::exists(dir / "driftfix" / "offsets.csv"));
    }
}
