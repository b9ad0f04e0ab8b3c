#include <string>
#include <vector>

#include "hjcon/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hjcon::cli::run(std::move(args));
}
