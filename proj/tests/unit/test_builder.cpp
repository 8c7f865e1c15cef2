#include "taoslite/builder.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

#include <fstream>
#include <random>

using namespace taoslite;
using namespace taoslite::test;

namespace {

struct BuilderFixture {
    TempDir tmp{"taoslite-build"};
    WorkspaceHandle handle;

    BuilderFixture() { handle = allocate(tmp.path(), 1); }

    PlatformProfile profile(const std::string& name, const std::string& script_body) {
        auto cmd = write_script(tmp.path() / (name + "-build.sh"), script_body);
        return {.name = name,
                .packaging_script = "packaging/" + name + ".spec",
                .build_command = cmd.string()};
    }

    void add_packaging(const PlatformProfile& p) {
        std::filesystem::create_directories((handle.source_dir / p.packaging_script).parent_path());
        std::ofstream(handle.source_dir / p.packaging_script) << "spec";
    }
};

}  // namespace

TEST_CASE("detect_profiles activates exactly the profiles whose script exists") {
    BuilderFixture fx;
    auto a = fx.profile("debian-like", "exit 0");
    auto b = fx.profile("yocto-like", "exit 0");
    auto c = fx.profile("tizen-like", "exit 0");
    std::vector<PlatformProfile> all{a, b, c};

    CHECK(detect_profiles(fx.handle, all).empty());

    fx.add_packaging(a);
    fx.add_packaging(c);
    auto active = detect_profiles(fx.handle, all);
    REQUIRE(active.size() == 2);
    CHECK(active[0].name == "debian-like");  // config order preserved
    CHECK(active[1].name == "tizen-like");
}

TEST_CASE("activation is purely a function of script presence") {
    BuilderFixture fx;
    std::vector<PlatformProfile> all;
    for (int i = 0; i < 6; ++i) all.push_back(fx.profile("prof" + std::to_string(i), "exit 0"));

    std::mt19937 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::string> expected;
        for (const auto& p : all) {
            std::error_code ec;
            std::filesystem::remove(fx.handle.source_dir / p.packaging_script, ec);
        }
        for (const auto& p : all) {
            if (rng() % 2 == 0) {
                fx.add_packaging(p);
                expected.push_back(p.name);
            }
        }
        auto active = detect_profiles(fx.handle, all);
        std::vector<std::string> got;
        for (const auto& p : active) got.push_back(p.name);
        CHECK(got == expected);
    }
}

TEST_CASE("build compiles a file into the profile artifact directory") {
    BuilderFixture fx;
    std::ofstream(fx.handle.source_dir / "hello.c")
        << "#include <stdio.h>\nint main(void){printf(\"hi\\n\");return 0;}\n";
    auto p = fx.profile("debian-like",
                        "cc -o \"$TAOS_ARTIFACT_DIR/hello\" hello.c");
    fx.add_packaging(p);

    auto outcome = build(fx.handle, p);
    CHECK(outcome.success);
    CHECK(outcome.exit_code == 0);
    REQUIRE(outcome.artifacts.size() == 1);
    CHECK(outcome.artifacts[0] == "out/debian-like/hello");
    CHECK(std::filesystem::exists(fx.handle.log_dir / "build-debian-like.txt"));
}

TEST_CASE("a nonzero build exit is a CI verdict, not an infrastructure error") {
    BuilderFixture fx;
    auto p = fx.profile("broken", "echo boom; exit 1");
    auto outcome = build(fx.handle, p);
    CHECK_FALSE(outcome.success);
    CHECK(outcome.exit_code == 1);

    std::ifstream log(outcome.log_path);
    std::string content((std::istreambuf_iterator<char>(log)),
                        std::istreambuf_iterator<char>());
    CHECK(content.find("boom") != std::string::npos);
}

TEST_CASE("a missing build command is an infrastructure error") {
    BuilderFixture fx;
    PlatformProfile p{.name = "ghost", .packaging_script = "x",
                      .build_command = "/nonexistent/build"};
    CHECK_THROWS_AS(build(fx.handle, p), InfrastructureError);
}

TEST_CASE("two profiles write into disjoint artifact subdirectories") {
    BuilderFixture fx;
    auto a = fx.profile("one", "echo a > \"$TAOS_ARTIFACT_DIR/a.txt\"");
    auto b = fx.profile("two", "echo b > \"$TAOS_ARTIFACT_DIR/b.txt\"");
    auto ra = build(fx.handle, a);
    auto rb = build(fx.handle, b);
    REQUIRE(ra.artifacts == std::vector<std::string>{"out/one/a.txt"});
    REQUIRE(rb.artifacts == std::vector<std::string>{"out/two/b.txt"});
}
