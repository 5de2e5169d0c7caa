#include "mfwf/cli.hpp"

int main(int argc, char** argv) { return mfwf::cli_main(argc, argv); }
