#include "pllhb/cli.hpp"

int main(int argc, char** argv) { return pllhb::cli::run(argc, argv); }
