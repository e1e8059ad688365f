#include "demian/cli/app.hpp"

int main(int argc, char** argv) { return demian::cli::dispatch(argc, argv); }
