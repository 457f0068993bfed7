LINE_POINTS = (0.0, 1.0, 3.0, 6.0, 10.0)

SQUARE_POINTS = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0))

TIED_POINTS = (-1.0, 1.0, 2.0, 2.0)

WIDE_SERIES = (b"timestamp,a,b\n"
               b"2020-01-01,1.0,10\n"
               b"2020-01-02,2.5,11\n"
               b"2020-01-03,-3,12\n")

WIDE_SERIES_BOM_CRLF = (b"\xef\xbb\xbft,a\r\n"
                        b"1,0.5\r\n"
                        b"2,0.25\r\n"
                        b"3,0.125")

WIDE_SERIES_NO_INDEX = (b"x,y\n"
                        b"1,2\n"
                        b"3,4\n")

LONG_SERIES = (b"timestamp,channel,value\n"
               b"1,a,1.0\n"
               b"1,b,5.0\n"
               b"2,a,2.0\n"
               b"2,b,6.0\n"
               b"3,a,3.0\n"
               b"3,b,7.0\n")

LONG_SERIES_RAGGED = (b"timestamp,channel,value\n"
                      b"1,a,1.0\n"
                      b"1,b,5.0\n"
                      b"2,a,2.0\n")

LONG_SERIES_BAD_HEADER = (b"time,chan,val\n"
                          b"1,a,1.0\n")

LABELLED = (b"0.0,0.1,0.2,0\n"
            b"1.0,1.1,1.2,1\n"
            b"\n"
            b"0.1,0.2,0.3,0\n")

LABELLED_BAD_LABEL = b"0.0,0.1,zero\n"

LABELLED_RAGGED = (b"0.0,0.1,0.2,0\n"
                   b"1.0,1.1,1\n")

NOT_A_NUMBER = (b"a,b\n"
                b"1,two\n")

CONFIG_EMPTY = ""

CONFIG_SEED = "seed = 7\n"

CONFIG_SUBSET = ("profile = desk\n"
                 "\n"
                 "[exp1]\n"
                 "d_list = 1,3\n"
                 "families = lss, hmm\n")

CONFIG_FORECAST = ("[forecast]\n"
                   "lookback = 32\n"
                   "split = 0.5,0.25,0.25\n"
                   "use_pca = false\n"
                   "group_tuning_metric = mae\n"
                   "source_fraction = 0.8\n")

CONFIG_TYPO = ("[exp1]\n"
               "d_lst = 1,3\n")

CONFIG_BAD_SECTION = ("[exp3]\n"
                      "reps = 1\n")

CONFIG_BAD_VALUE = ("[exp2]\n"
                    "reps = many\n")

CONFIG_SYNTAX = ("seed = 7\n"
                 "this line has no separator\n")
