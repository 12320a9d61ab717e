#include "ictd/commands.hpp"

int main(int argc, char** argv) { return ictd::cli::run_cli(argc, argv); }
