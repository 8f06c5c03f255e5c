#include <string>
#include <vector>

#include "ablm/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ablm::cli::run(args);
}
