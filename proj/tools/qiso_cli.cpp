#include "qiso/cli.hpp"

int main(int argc, char** argv) { return qiso::cli::main_entry(argc, argv); }
