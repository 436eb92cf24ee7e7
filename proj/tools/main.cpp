#include "posestitch/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return posestitch::run_cli(args);
}
