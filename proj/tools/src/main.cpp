#include "commands.hpp"

int main(int argc, char** argv) { return lithofield::cli::run_cli(argc, argv); }
