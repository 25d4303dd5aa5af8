#include "pdmesh/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

int main(int argc, char** argv)
{
    spdlog::set_default_logger(spdlog::stderr_color_mt("pdmesh"));
    return pdmesh::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
