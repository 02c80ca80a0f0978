#include "cttx/cli.hpp"

int main(int argc, char** argv) { return cttx::cli::main_entry(argc, argv); }
