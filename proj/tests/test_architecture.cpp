#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <string>

namespace {

std::set<std::string> include_closure(const std::string& root) {
    const std::filesystem::path inc = std::filesystem::path(GESTURA_SOURCE_DIR) / "include";
    const std::regex local(R"re(#include\s+"(gestura/[^"]+)")re");
    std::set<std::string> seen;
    std::vector<std::string> todo{root};
    while (!todo.empty()) {
        const auto h = todo.back();
        todo.pop_back();
        if (!seen.insert(h).second) continue;
        std::ifstream in(inc / h);
        REQUIRE_MESSAGE(in.good(), "cannot open " << h);
        std::string line;
        std::smatch m;
        while (std::getline(in, line))
            if (std::regex_search(line, m, local)) todo.push_back(m[1]);
    }
    return seen;
}

}  // namespace

TEST_CASE("aggregation sees parameters only") {
    const auto closure = include_closure("gestura/aggregation.hpp");
    for (const char* banned : {"gestura/synthdata.hpp", "gestura/model.hpp", "gestura/dataset_io.hpp",
                               "gestura/training.hpp", "gestura/federated.hpp"}) {
        CHECK_MESSAGE(closure.count(banned) == 0, "aggregation.hpp reaches " << banned);
    }
    CHECK(closure.count("gestura/params.hpp") == 1);
}
