#include "cli.hpp"

int main(int argc, char** argv)
{
    return discreg::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
