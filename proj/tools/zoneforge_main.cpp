#include "zoneforge/cli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return zoneforge::cli::dispatch(args);
}
