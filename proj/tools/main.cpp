#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
    using namespace spinphase::cli;
    try {
        const Invocation inv = parse_command_line(std::vector<std::string>(argv + 1, argv + argc));
        return run(inv);
    } catch (const ConfigError& e) {
        std::cerr << "spinphase: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "spinphase: " << e.what() << "\n";
        return 1;
    }
}
