#include "cli.hpp"

int main(int argc, char** argv) { return pcv2::cli::run(argc, argv); }
