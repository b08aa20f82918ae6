#include <string>
#include <vector>

#include "delayfb/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return delayfb::cli::run(args);
}
